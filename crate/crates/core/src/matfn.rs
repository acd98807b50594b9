//! Matrix permanent and hafnian, each paired with a brute-force oracle.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

pub const PERMANENT_MAX: usize = 30;
pub const PERMANENT_ORACLE_MAX: usize = 8;
pub const HAFNIAN_MAX: usize = 24;
pub const HAFNIAN_ORACLE_MAX: usize = 12;

const SYMMETRY_TOL: f64 = 1e-10;

// Ryser chunks are a fixed function of n, so the summation order (and the
// result bits) never depend on the thread pool.
const PARALLEL_FROM: usize = 14;
const CHUNK_BITS: usize = 6;

/// Rows and columns to pick out of a matrix; repeats duplicate rows/columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmatrixSelector {
    pub row_modes: Vec<usize>,
    pub col_modes: Vec<usize>,
}

impl SubmatrixSelector {
    pub fn new(row_modes: Vec<usize>, col_modes: Vec<usize>) -> Self {
        Self { row_modes, col_modes }
    }

    /// Same modes for rows and columns, as the hafnian needs.
    pub fn symmetric(modes: Vec<usize>) -> Self {
        Self { row_modes: modes.clone(), col_modes: modes }
    }
}

pub fn select_submatrix(u: &ComplexMatrix, sel: &SubmatrixSelector) -> Result<ComplexMatrix> {
    for &r in &sel.row_modes {
        if r >= u.rows() {
            return Err(Error::Index { index: r, bound: u.rows() });
        }
    }
    for &c in &sel.col_modes {
        if c >= u.cols() {
            return Err(Error::Index { index: c, bound: u.cols() });
        }
    }
    Ok(ComplexMatrix::from_fn(sel.row_modes.len(), sel.col_modes.len(), |i, j| {
        u[(sel.row_modes[i], sel.col_modes[j])]
    }))
}

/// Neumaier-compensated complex accumulator.
#[derive(Default, Clone, Copy)]
struct Compensated {
    re: (f64, f64),
    im: (f64, f64),
}

impl Compensated {
    fn add(&mut self, z: C64) {
        fn step((sum, c): &mut (f64, f64), x: f64) {
            let t = *sum + x;
            if sum.abs() >= x.abs() {
                *c += (*sum - t) + x;
            } else {
                *c += (x - t) + *sum;
            }
            *sum = t;
        }
        step(&mut self.re, z.re);
        step(&mut self.im, z.im);
    }

    fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

fn require_square(a: &ComplexMatrix) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    Ok(a.rows())
}

/// Exact permanent by Ryser's formula, visiting column subsets in Gray-code
/// order so each step updates the row sums by a single column.
pub fn permanent(a: &ComplexMatrix) -> Result<C64> {
    let n = require_square(a)?;
    if n > PERMANENT_MAX {
        return Err(Error::Guard { what: "permanent size", actual: n as u128, limit: PERMANENT_MAX as u128 });
    }
    match n {
        0 => return Ok(C64::new(1.0, 0.0)),
        1 => return Ok(a[(0, 0)]),
        2 => return Ok(a[(0, 0)] * a[(1, 1)] + a[(0, 1)] * a[(1, 0)]),
        _ => {}
    }
    let total: u64 = 1 << n;
    let sum = if n >= PARALLEL_FROM {
        let chunk = total >> CHUNK_BITS;
        let parts: Vec<C64> = (0..1u64 << CHUNK_BITS)
            .into_par_iter()
            .map(|c| ryser_range(a, n, c * chunk, (c + 1) * chunk))
            .collect();
        let mut acc = Compensated::default();
        parts.into_iter().for_each(|p| acc.add(p));
        acc.value()
    } else {
        ryser_range(a, n, 0, total)
    };
    Ok(if n % 2 == 0 { sum } else { -sum })
}

/// Signed Ryser terms for Gray-code indices `start..end`.
fn ryser_range(a: &ComplexMatrix, n: usize, start: u64, end: u64) -> C64 {
    let mut row_sums = vec![C64::default(); n];
    let mut gray = start ^ (start >> 1);
    for j in 0..n {
        if gray >> j & 1 == 1 {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs += a[(i, j)];
            }
        }
    }
    let mut acc = Compensated::default();
    let term = |row_sums: &[C64], gray: u64| {
        let prod: C64 = row_sums.iter().product();
        if gray.count_ones() % 2 == 1 { -prod } else { prod }
    };
    if start != 0 {
        acc.add(term(&row_sums, gray));
    }
    for k in start + 1..end {
        let j = k.trailing_zeros() as usize;
        let next = k ^ (k >> 1);
        if next >> j & 1 == 1 {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs += a[(i, j)];
            }
        } else {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs -= a[(i, j)];
            }
        }
        gray = next;
        acc.add(term(&row_sums, gray));
    }
    acc.value()
}

/// Permanent as the literal sum over all `n!` permutations.
pub fn permanent_oracle(a: &ComplexMatrix) -> Result<C64> {
    let n = require_square(a)?;
    if n > PERMANENT_ORACLE_MAX {
        return Err(Error::Guard {
            what: "permanent oracle size",
            actual: n as u128,
            limit: PERMANENT_ORACLE_MAX as u128,
        });
    }
    fn go(a: &ComplexMatrix, row: usize, used: &mut [bool], prefix: C64, acc: &mut C64) {
        let n = used.len();
        if row == n {
            *acc += prefix;
            return;
        }
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                go(a, row + 1, used, prefix * a[(row, col)], acc);
                used[col] = false;
            }
        }
    }
    let mut acc = C64::default();
    go(a, 0, &mut vec![false; n], C64::new(1.0, 0.0), &mut acc);
    Ok(acc)
}

fn require_symmetric_even(a: &ComplexMatrix, limit: usize, what: &'static str) -> Result<usize> {
    let n = require_square(a)?;
    if n % 2 == 1 {
        return Err(Error::Shape(format!("hafnian needs even size, got {n}")));
    }
    if n > limit {
        return Err(Error::Guard { what, actual: n as u128, limit: limit as u128 });
    }
    let scale = a.as_slice().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).norm());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::Symmetry(worst));
    }
    Ok(n)
}

/// Loop-free hafnian: sum over perfect matchings of the product of matched
/// entries. Diagonal entries never contribute.
///
/// Expands on the lowest unmatched vertex and memoises on the set of
/// vertices still unmatched.
pub fn hafnian(a: &ComplexMatrix) -> Result<C64> {
    let n = require_symmetric_even(a, HAFNIAN_MAX, "hafnian size")?;
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    // upper triangle, so both halves of a nearly symmetric input agree
    let w = |i: usize, j: usize| if i < j { a[(i, j)] } else { a[(j, i)] };
    let mut memo: HashMap<u32, C64> = HashMap::new();
    fn go(mask: u32, w: &dyn Fn(usize, usize) -> C64, memo: &mut HashMap<u32, C64>) -> C64 {
        if mask == 0 {
            return C64::new(1.0, 0.0);
        }
        if let Some(&v) = memo.get(&mask) {
            return v;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut acc = C64::default();
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let wij = w(i, j);
            if wij != C64::default() {
                acc += wij * go(rest & !(1 << j), w, memo);
            }
        }
        memo.insert(mask, acc);
        acc
    }
    Ok(go(((1u64 << n) - 1) as u32, &w, &mut memo))
}

/// Hafnian as the plain sum over all `(2n-1)!!` perfect matchings.
pub fn hafnian_oracle(a: &ComplexMatrix) -> Result<C64> {
    let n = require_symmetric_even(a, HAFNIAN_ORACLE_MAX, "hafnian oracle size")?;
    fn go(a: &ComplexMatrix, free: &mut Vec<usize>, prefix: C64, acc: &mut C64) {
        if free.is_empty() {
            *acc += prefix;
            return;
        }
        let first = free.remove(0);
        for k in 0..free.len() {
            let partner = free.remove(k);
            go(a, free, prefix * a[(first.min(partner), first.max(partner))], acc);
            free.insert(k, partner);
        }
        free.insert(0, first);
    }
    let mut acc = C64::default();
    go(a, &mut (0..n).collect(), C64::new(1.0, 0.0), &mut acc);
    Ok(acc)
}
