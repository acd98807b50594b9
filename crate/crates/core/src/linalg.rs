//! Dense complex matrices and the random ensembles used to build circuits.
//!
//! Storage is row-major with no sparsity; the largest circuits handled here
//! are a few hundred modes, where dense arithmetic is cheap enough.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A reproducible random stream keyed by `(seed, stream)`.
///
/// Two streams with the same key produce the same draws. Parallel Monte-Carlo
/// derives one child stream per trial with [`RngStream::child`], so results do
/// not depend on how trials are scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Independent sub-stream `index` of this stream.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_f42d_4c95_7f2d))),
            stream: index,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `Tr(self^† other)` without forming the product.
    pub fn adjoint_trace_with(&self, other: &Self) -> C64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |U^† U - I|` over entries.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("adjoint is conformable");
        gram.max_abs_diff(&Self::identity(self.cols))
    }

    /// Replaces rows `a`, `b` by `gate · (row_a, row_b)`; this is left
    /// multiplication by the gate embedded on modes `(a, b)`.
    pub fn apply_two_mode_left(&mut self, gate: &ComplexMatrix, a: usize, b: usize) {
        let (g00, g01, g10, g11) = (gate[(0, 0)], gate[(0, 1)], gate[(1, 0)], gate[(1, 1)]);
        let cols = self.cols;
        for c in 0..cols {
            let x = self.data[a * cols + c];
            let y = self.data[b * cols + c];
            if x == ZERO && y == ZERO {
                continue;
            }
            self.data[a * cols + c] = g00 * x + g01 * y;
            self.data[b * cols + c] = g10 * x + g11 * y;
        }
    }

    /// Complex determinant by partial-pivot elimination (small matrices only).
    pub fn determinant(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::Shape("determinant of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = ONE;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
                .unwrap();
            if a[pivot * n + k] == ZERO {
                return Ok(ZERO);
            }
            if pivot != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot * n + c);
                }
                det = -det;
            }
            let p = a[k * n + k];
            det *= p;
            for i in k + 1..n {
                let f = a[i * n + k] / p;
                for c in k..n {
                    let v = a[k * n + c];
                    a[i * n + c] -= f * v;
                }
            }
        }
        Ok(det)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix shapes must conform")
    }
}

fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI)
}

/// Complex standard normal with `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re / SQRT_2, im / SQRT_2)
}

/// Haar-random element of U(2).
///
/// Uses the Euler parametrisation: a uniform global phase times an SU(2)
/// element with uniform phases and `cos^2 θ` uniform on `[0, 1]`.
pub fn haar_u2<R: Rng + ?Sized>(rng: &mut R) -> ComplexMatrix {
    let cos_sq: f64 = rng.random();
    let (c, s) = (cos_sq.sqrt(), (1.0 - cos_sq).sqrt());
    let global = uniform_phase(rng);
    let psi = uniform_phase(rng);
    let chi = uniform_phase(rng);
    ComplexMatrix {
        rows: 2,
        cols: 2,
        data: vec![
            global * psi * c,
            global * chi * s,
            -global * chi.conj() * s,
            global * psi.conj() * c,
        ],
    }
}

/// `rows x cols` matrix of i.i.d. complex standard normals.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimension(format!("ginibre {rows}x{cols}")));
    }
    let data = (0..rows * cols).map(|_| complex_normal(rng)).collect();
    Ok(ComplexMatrix { rows, cols, data })
}

/// Haar-random element of U(m): Householder QR of a Ginibre draw, with the
/// phases of `R`'s diagonal divided out of `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let z = ginibre(m, m, rng)?;
    Ok(unitary_from_ginibre(z))
}

fn unitary_from_ginibre(mut a: ComplexMatrix) -> ComplexMatrix {
    let m = a.rows;
    let mut q = ComplexMatrix::identity(m);
    let mut r_diag_phase = vec![ONE; m];
    let mut v = vec![ZERO; m];
    for k in 0..m {
        let norm = (k..m).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        // R_kk = -phase * norm
        let alpha = -phase * norm;
        r_diag_phase[k] = -phase;
        for i in k..m {
            v[i] = a[(i, k)];
        }
        v[k] -= alpha;
        let vnorm = (k..m).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in v.iter_mut().take(m).skip(k) {
            *vi /= vnorm;
        }
        // A <- (I - 2 v v^H) A on rows k..
        for c in k..m {
            let dot: C64 = (k..m).map(|i| v[i].conj() * a[(i, c)]).sum();
            for i in k..m {
                let t = v[i] * dot * 2.0;
                a[(i, c)] -= t;
            }
        }
        // Q <- Q (I - 2 v v^H) on columns k..
        for r in 0..m {
            let dot: C64 = (k..m).map(|i| q[(r, i)] * v[i]).sum();
            for i in k..m {
                let t = dot * v[i].conj() * 2.0;
                q[(r, i)] -= t;
            }
        }
    }
    for r in 0..m {
        for (c, ph) in r_diag_phase.iter().enumerate() {
            q[(r, c)] *= ph;
        }
    }
    q
}

/// Embeds a 2x2 gate acting on modes `(a, b)` of an `m`-mode identity.
pub fn embed_two_mode(gate: &ComplexMatrix, a: usize, b: usize, m: usize) -> Result<ComplexMatrix> {
    if gate.rows != 2 || gate.cols != 2 {
        return Err(Error::InvalidGate(format!("gate must be 2x2, got {}x{}", gate.rows, gate.cols)));
    }
    if a == b {
        return Err(Error::InvalidGate(format!("gate modes must differ, got ({a}, {b})")));
    }
    for &i in &[a, b] {
        if i >= m {
            return Err(Error::Index { index: i, bound: m });
        }
    }
    let mut u = ComplexMatrix::identity(m);
    u[(a, a)] = gate[(0, 0)];
    u[(a, b)] = gate[(0, 1)];
    u[(b, a)] = gate[(1, 0)];
    u[(b, b)] = gate[(1, 1)];
    Ok(u)
}

pub fn frobenius_norm_sq(a: &ComplexMatrix) -> f64 {
    a.data.iter().map(C64::norm_sqr).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(seed: u64) -> ChaCha8Rng {
        RngStream::new(seed, 0).rng()
    }

    /// Standard error of the mean of `xs`.
    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn haar_u2_is_unitary_with_unit_determinant() {
        let mut rng = stream(3);
        for _ in 0..200 {
            let u = haar_u2(&mut rng);
            assert!(u.unitarity_defect() < 1e-12);
            assert!((u.determinant().unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_u2_is_deterministic_per_stream() {
        let a = haar_u2(&mut RngStream::new(1, 0).rng());
        let b = haar_u2(&mut RngStream::new(1, 0).rng());
        let c = haar_u2(&mut RngStream::new(1, 1).rng());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn haar_u2_first_moment() {
        let mut rng = stream(11);
        let xs: Vec<f64> = (0..100_000).map(|_| haar_u2(&mut rng)[(0, 0)].norm_sqr()).collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn haar_unitary_one_mode_is_a_phase() {
        let u = haar_unitary(1, &mut stream(2)).unwrap();
        assert_eq!((u.rows(), u.cols()), (1, 1));
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_unitary_rejects_zero_modes() {
        assert!(matches!(haar_unitary(0, &mut stream(2)), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn haar_unitary_rows_orthonormal() {
        let mut rng = stream(5);
        for m in [2, 3, 8, 17, 32] {
            let u = haar_unitary(m, &mut rng).unwrap();
            assert!(u.unitarity_defect() < 1e-10);
            let uu = &u * &u.adjoint();
            assert!(uu.max_abs_diff(&ComplexMatrix::identity(m)) < 1e-10);
        }
    }

    #[test]
    fn haar_unitary_first_moment_every_entry() {
        let m = 8;
        let draws = 10_000;
        let mut rng = stream(9);
        let mut samples = vec![Vec::with_capacity(draws); m * m];
        for _ in 0..draws {
            let u = haar_unitary(m, &mut rng).unwrap();
            for (k, z) in u.as_slice().iter().enumerate() {
                samples[k].push(z.norm_sqr());
            }
        }
        for xs in &samples {
            let (mean, se) = mean_and_se(xs);
            assert!((mean - 1.0 / m as f64).abs() < 3.0 * se, "mean {mean} se {se}");
        }
    }

    #[test]
    fn haar_invariance_under_row_permutation() {
        // |(PU)_00|^2 = |U_{p(0),0}|^2; compare with |U_00|^2 from independent draws.
        let m = 5;
        let mut rng = stream(21);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..10_000 {
            a.push(haar_unitary(m, &mut rng).unwrap()[(0, 0)].norm_sqr());
            b.push(haar_unitary(m, &mut rng).unwrap()[(3, 0)].norm_sqr());
        }
        let d = crate::stats::ks_statistic(&a, &b);
        assert!(d < crate::stats::ks_critical_value(a.len(), b.len(), 0.01), "ks {d}");
    }

    #[test]
    fn ginibre_shape_moment_and_determinism() {
        let x = ginibre(2, 3, &mut stream(1)).unwrap();
        assert_eq!((x.rows(), x.cols()), (2, 3));
        assert_eq!(x, ginibre(2, 3, &mut stream(1)).unwrap());
        assert!(ginibre(0, 3, &mut stream(1)).is_err());

        let mut rng = stream(4);
        let xs: Vec<f64> = (0..100_000).map(|_| complex_normal(&mut rng).norm_sqr()).collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn embedding_behaves() {
        let id2 = ComplexMatrix::identity(2);
        assert_eq!(embed_two_mode(&id2, 0, 3, 5).unwrap(), ComplexMatrix::identity(5));

        let h = ComplexMatrix::from_rows(&[
            vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        ])
        .unwrap()
        .scale(C64::new(1.0 / SQRT_2, 0.0));
        let e = embed_two_mode(&h, 0, 1, 3).unwrap();
        assert_eq!(e.row(2), &[ZERO, ZERO, ONE]);
        let prod = &e * &e.adjoint();
        assert!(prod.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-12);

        assert!(matches!(embed_two_mode(&h, 1, 1, 3), Err(Error::InvalidGate(_))));
        assert!(matches!(embed_two_mode(&h, 0, 3, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn left_application_matches_embedding() {
        let mut rng = stream(9);
        let u = haar_unitary(6, &mut rng).unwrap();
        let g = haar_u2(&mut rng);
        let mut fast = u.clone();
        fast.apply_two_mode_left(&g, 1, 4);
        let slow = &embed_two_mode(&g, 1, 4, 6).unwrap() * &u;
        assert!(fast.max_abs_diff(&slow) < 1e-14);
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(frobenius_norm_sq(&ComplexMatrix::identity(7)), 7.0);
        assert_eq!(frobenius_norm_sq(&ComplexMatrix::zeros(3, 4)), 0.0);
        let u = haar_unitary(12, &mut stream(6)).unwrap();
        assert!((frobenius_norm_sq(&u) - 12.0).abs() < 1e-10);
    }

    #[test]
    fn child_streams_differ() {
        let root = RngStream::new(7, 0);
        let a: u64 = root.child(0).rng().random();
        let b: u64 = root.child(1).rng().random();
        let c: u64 = root.child(0).rng().random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
