//! Gaussian boson sampling: hafnian output weights, pair-source feasibility
//! and counting, the Gaussian-scheme thresholds, and covariance-matrix tools
//! for Rényi-2 entanglement.
//!
//! Covariances use x-block then p-block ordering with vacuum equal to the
//! identity; input squeezing shrinks the x quadrature.

use std::f64::consts::E;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{self, CircuitArchitecture, Ensemble};
use crate::error::{Error, Result};
use crate::fock::{self, DepthThresholdReport, FockPattern, PermittedCountReport, Scheme};
use crate::linalg::{ComplexMatrix, RngStream, C64};
use crate::matching;
use crate::matfn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbsConfig {
    pub m: usize,
    pub k_inputs: usize,
    pub squeeze_r: f64,
    pub target_pairs: usize,
}

impl GbsConfig {
    pub fn new(m: usize, k_inputs: usize, squeeze_r: f64, target_pairs: usize) -> Result<Self> {
        let cfg = Self { m, k_inputs, squeeze_r, target_pairs };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_inputs > self.m || self.target_pairs > self.k_inputs {
            return Err(Error::Parameter(format!(
                "need n <= K <= M, got n={}, K={}, M={}",
                self.target_pairs, self.k_inputs, self.m
            )));
        }
        if !(self.squeeze_r > 0.0) {
            return Err(Error::Parameter(format!("squeezing must be positive, got {}", self.squeeze_r)));
        }
        Ok(())
    }

    /// Squeezed inputs on the first `K` modes.
    pub fn default_inputs(&self) -> FockPattern {
        FockPattern::new((0..self.k_inputs).collect())
    }

    /// Mean photon number `K sinh^2 r` of the input.
    pub fn mean_photons(&self) -> f64 {
        self.k_inputs as f64 * self.squeeze_r.sinh().powi(2)
    }
}

fn check_gbs_input(m: usize, k: usize, input: &FockPattern) -> Result<()> {
    if !input.is_collision_free() || input.photon_count() != k {
        return Err(Error::Arity(format!("need {k} distinct squeezed input modes")));
    }
    input.check_bounds(m)
}

/// `|Haf(B_s)|^2 / s!` with `B = U I_K U^T` and squeezers on the first `K` modes.
pub fn gbs_unnormalized_probability(u: &ComplexMatrix, cfg: &GbsConfig, output: &FockPattern) -> Result<f64> {
    gbs_unnormalized_probability_with_inputs(u, &cfg.default_inputs(), output)
}

/// As [`gbs_unnormalized_probability`] with squeezers on `input`.
pub fn gbs_unnormalized_probability_with_inputs(
    u: &ComplexMatrix,
    input: &FockPattern,
    output: &FockPattern,
) -> Result<f64> {
    if output.photon_count() % 2 == 1 {
        return Err(Error::Parity(output.photon_count()));
    }
    check_gbs_input(u.cols(), input.photon_count(), input)?;
    output.check_bounds(u.rows())?;
    let s = output.modes();
    let b = ComplexMatrix::from_fn(s.len(), s.len(), |i, j| {
        input.modes().iter().map(|&t| u[(s[i], t)] * u[(s[j], t)]).sum::<C64>()
    });
    Ok(matfn::hafnian(&b)?.norm_sqr() / output.multiplicity_factorial())
}

/// `pair_ok[a][b]`: some squeezed input lies in the backward cones of both
/// output modes `a` and `b`.
fn pair_table(arch: &CircuitArchitecture, input: &FockPattern, depth: usize) -> Result<Vec<Vec<bool>>> {
    let m = arch.mode_count();
    let mut is_input = vec![false; m];
    input.modes().iter().for_each(|&t| is_input[t] = true);
    let sources: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            let cone = arch::backward_lightcone(arch, j, depth)?;
            Ok(cone.modes.into_iter().filter(|&t| is_input[t]).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..m)
        .map(|a| (0..m).map(|b| sources[a].iter().any(|t| sources[b].binary_search(t).is_ok())).collect())
        .collect())
}

fn pairable(table: &[Vec<bool>], s: &[usize]) -> bool {
    let adj: Vec<Vec<bool>> =
        (0..s.len()).map(|i| (0..s.len()).map(|j| i != j && table[s[i]][s[j]]).collect()).collect();
    matching::has_perfect_matching(&adj)
}

/// Whether the `2n` output photons can be grouped into pairs that each
/// share a squeezed source.
pub fn is_permitted_gbs(
    arch: &CircuitArchitecture,
    cfg: &GbsConfig,
    input: &FockPattern,
    output: &FockPattern,
    depth: usize,
) -> Result<bool> {
    check_gbs_input(arch.mode_count(), cfg.k_inputs, input)?;
    output.check_bounds(arch.mode_count())?;
    if output.photon_count() % 2 == 1 {
        return Ok(false);
    }
    Ok(pairable(&pair_table(arch, input, depth)?, output.modes()))
}

/// Exact permitted count over `binom(M + 2n - 1, 2n)` outcomes and the
/// closed-form bound `binom(M+n-1, n) ((4D/d)^d)^n / 2^n`.
pub fn count_permitted_gbs(
    arch: &CircuitArchitecture,
    cfg: &GbsConfig,
    input: &FockPattern,
    depth: usize,
) -> Result<PermittedCountReport> {
    check_gbs_input(arch.mode_count(), cfg.k_inputs, input)?;
    let m = arch.mode_count();
    let photons = 2 * cfg.target_pairs;
    let total = fock::outcome_count(m, photons);
    if total > fock::ENUMERATION_GUARD {
        return Err(Error::Guard { what: "outcome count", actual: total, limit: fock::ENUMERATION_GUARD });
    }
    let table = pair_table(arch, input, depth)?;
    let exact = fock::count_outcomes(m, photons, |s| pairable(&table, s));

    let n = cfg.target_pairs as i32;
    let d = arch.geometry().dim() as f64;
    let pair_positions = fock::outcome_count(m, cfg.target_pairs) as f64;
    let cone = (4.0 * depth as f64 / d).powf(d);
    let bound = (pair_positions * cone.powi(n) / 2f64.powi(n)).floor();
    let upper = if bound >= u128::MAX as f64 { u128::MAX } else { bound as u128 };

    let t = total as f64;
    Ok(PermittedCountReport {
        exact_count: exact,
        upper_bound: upper,
        total_outcomes: total,
        delta_exact: exact as f64 / t,
        delta_bound: (upper as f64 / t).min(1.0),
        cone_size_bound: None,
    })
}

/// `2 (2^{2d+1} D^d n^{1-γ} / (e d^d c1))^n`, the closed-form bound on the
/// Gaussian permitted-outcome ratio with `M = c1 n^γ`.
pub fn gaussian_delta_bound(m: usize, pairs: usize, gamma: f64, c1: f64, d: usize, depth: f64) -> Result<f64> {
    fock::check_scaling(m, pairs, gamma, c1)?;
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    let (nf, df) = (pairs as f64, d as f64);
    let base = 2f64.powf(2.0 * df + 1.0) * depth.powf(df) * nf.powf(1.0 - gamma) / (E * df.powf(df) * c1);
    Ok(2.0 * base.powf(nf))
}

/// Depth thresholds for Gaussian sampling of `n` pairs on `M = c1 n^γ` modes.
pub fn gaussian_depth_thresholds(
    pairs: usize,
    gamma: f64,
    c1: f64,
    d: usize,
    lambda: f64,
    beta: f64,
) -> Result<DepthThresholdReport> {
    fock::check_threshold_params(lambda, beta, gamma, c1, d, pairs)?;
    let (nf, df) = (pairs as f64, d as f64);
    let kappa = (E * c1).powf(1.0 / df) * df / 2f64.powf(1.0 / df + 2.0);
    let alpha = (E * c1).powf(2.0 / df) * beta * df / 2f64.powf(2.0 / df + 3.0);
    let ln_m = c1.ln() + gamma * nf.ln();
    Ok(DepthThresholdReport {
        scheme: Scheme::Gaussian,
        kappa,
        alpha,
        threshold_any_ensemble: kappa * nf.powf((gamma - 1.0) / df),
        threshold_local_random: alpha * nf.powf(2.0 * (gamma - 1.0) / df - lambda),
        epsilon: (fock::ln_factorial(2 * pairs) - 2.0 * nf * ln_m).exp(),
        poly_factor: 1.0,
        photons: 2 * pairs,
        gamma,
        c_const: c1,
        lambda,
        beta,
        d,
    })
}

/// Probability of `2n` photons in total from `K` equally squeezed vacua,
/// `binom(K/2 + n - 1, n) tanh^{2n} r / cosh^K r`.
///
/// For odd `K` the binomial is continued to half-integer arguments; see
/// [`pair_marginal_is_extension`].
pub fn photon_pair_marginal(cfg: &GbsConfig, pairs: usize) -> f64 {
    let a = cfg.k_inputs as f64 / 2.0;
    let t2 = cfg.squeeze_r.tanh().powi(2);
    let mut term = cfg.squeeze_r.cosh().powf(-(cfg.k_inputs as f64));
    for i in 1..=pairs {
        term *= (a + i as f64 - 1.0) / i as f64 * t2;
    }
    term
}

/// True when [`photon_pair_marginal`] uses the half-integer continuation.
pub fn pair_marginal_is_extension(cfg: &GbsConfig) -> bool {
    cfg.k_inputs % 2 == 1
}

/// Real symmetric `2M x 2M` quadrature covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    sigma: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Checks symmetry and the uncertainty relation `σ + iΩ ⪰ 0`.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let cov = Self { sigma };
        cov.validate()?;
        Ok(cov)
    }

    pub fn vacuum(m: usize) -> Self {
        Self { sigma: DMatrix::identity(2 * m, 2 * m) }
    }

    pub fn modes(&self) -> usize {
        self.sigma.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sigma.nrows();
        if n != self.sigma.ncols() || n % 2 == 1 || n == 0 {
            return Err(Error::Shape(format!("covariance of shape {}x{}", n, self.sigma.ncols())));
        }
        let asym = (&self.sigma - self.sigma.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::Validity(format!("covariance asymmetric by {asym:e}")));
        }
        let min = self.uncertainty_min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::Validity(format!("uncertainty relation violated, eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Smallest eigenvalue of `σ + iΩ`, through its real symmetric embedding.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let n = self.sigma.nrows();
        let m = n / 2;
        let mut omega = DMatrix::<f64>::zeros(n, n);
        for i in 0..m {
            omega[(i, m + i)] = 1.0;
            omega[(m + i, i)] = -1.0;
        }
        // H = A + iB  <->  [[A, -B], [B, A]]
        let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.sigma);
        big.view_mut((n, n), (n, n)).copy_from(&self.sigma);
        big.view_mut((0, n), (n, n)).copy_from(&(-&omega));
        big.view_mut((n, 0), (n, n)).copy_from(&omega);
        SymmetricEigen::new(big).eigenvalues.min()
    }

    /// `Σ_j (σ_xx + σ_pp - 2) / 4`.
    pub fn mean_photon_number(&self) -> f64 {
        let m = self.modes();
        (0..m).map(|j| (self.sigma[(j, j)] + self.sigma[(m + j, m + j)] - 2.0) / 4.0).sum()
    }

    pub fn determinant(&self) -> f64 {
        self.sigma.determinant()
    }
}

/// SMSV covariance with squeezers on `input_modes`.
pub fn smsv_covariance(cfg: &GbsConfig, input_modes: &FockPattern) -> Result<CovarianceMatrix> {
    check_gbs_input(cfg.m, cfg.k_inputs, input_modes)?;
    Ok(squeezed_vacuum(cfg.m, input_modes.modes(), cfg.squeeze_r))
}

/// Squeezed vacuum on `inputs`, vacuum elsewhere; `r = 0` gives the vacuum.
pub fn squeezed_vacuum(m: usize, inputs: &[usize], r: f64) -> CovarianceMatrix {
    let mut sigma = DMatrix::identity(2 * m, 2 * m);
    for &i in inputs {
        sigma[(i, i)] = (-2.0 * r).exp();
        sigma[(m + i, m + i)] = (2.0 * r).exp();
    }
    CovarianceMatrix { sigma }
}

fn orthogonal_image(u: &ComplexMatrix) -> DMatrix<f64> {
    let m = u.rows();
    DMatrix::from_fn(2 * m, 2 * m, |r, c| {
        let z = u[(r % m, c % m)];
        match (r < m, c < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn check_unitary(u: &ComplexMatrix, m: usize) -> Result<()> {
    if u.rows() != m || u.cols() != m {
        return Err(Error::Shape(format!("{}x{} unitary on {m} modes", u.rows(), u.cols())));
    }
    let defect = u.unitarity_defect();
    if defect > 1e-8 {
        return Err(Error::Validity(format!("matrix is not unitary, defect {defect:e}")));
    }
    Ok(())
}

/// `O σ O^T` for the orthogonal symplectic image `O` of a passive `u`.
pub fn evolve_covariance(sigma: &CovarianceMatrix, u: &ComplexMatrix) -> Result<CovarianceMatrix> {
    check_unitary(u, sigma.modes())?;
    let o = orthogonal_image(u);
    Ok(CovarianceMatrix { sigma: &o * &sigma.sigma * o.transpose() })
}

fn quadrature_indices(m: usize, modes: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = modes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted.len() >= m {
        return Err(Error::Partition(format!("{} of {m} modes selected", sorted.len())));
    }
    if let Some(&top) = sorted.last().filter(|&&t| t >= m) {
        return Err(Error::Index { index: top, bound: m });
    }
    Ok(sorted.iter().copied().chain(sorted.iter().map(|&j| j + m)).collect())
}

/// Principal submatrix on the x and p quadratures of `modes`.
pub fn reduced_covariance(sigma: &CovarianceMatrix, modes: &[usize]) -> Result<CovarianceMatrix> {
    let idx = quadrature_indices(sigma.modes(), modes)?;
    Ok(CovarianceMatrix { sigma: sigma.sigma.select_rows(&idx).select_columns(&idx) })
}

/// `reduced_covariance(evolve_covariance(sigma, u), modes)` without forming
/// the full evolved matrix.
pub fn evolve_reduced(sigma: &CovarianceMatrix, u: &ComplexMatrix, modes: &[usize]) -> Result<CovarianceMatrix> {
    check_unitary(u, sigma.modes())?;
    let idx = quadrature_indices(sigma.modes(), modes)?;
    let o = orthogonal_image(u).select_rows(&idx);
    Ok(CovarianceMatrix { sigma: &o * &sigma.sigma * o.transpose() })
}

/// `½ ln det σ`.
pub fn renyi2_entropy(sigma: &CovarianceMatrix) -> Result<f64> {
    let det = sigma.determinant();
    if !(det > 0.0) {
        return Err(Error::Validity(format!("covariance determinant {det:e} is not positive")));
    }
    Ok(0.5 * det.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PagePoint {
    pub k: usize,
    pub mean_s2: f64,
    pub stderr: f64,
}

/// Average Rényi-2 entropy of a uniformly random `k`-mode subsystem for
/// `k = 1..M-1`, with every mode squeezed by `r`. Each `(k, sample)` pair
/// draws its own circuit and subset from a derived stream.
pub fn page_curve(ensemble: &Ensemble, r: f64, samples: usize, stream: &RngStream) -> Result<Vec<PagePoint>> {
    let m = ensemble.mode_count();
    if samples == 0 {
        return Err(Error::Parameter("page curve needs at least one sample".into()));
    }
    if m < 2 {
        return Err(Error::Partition("page curve needs at least two modes".into()));
    }
    let all: Vec<usize> = (0..m).collect();
    let sigma = squeezed_vacuum(m, &all, r);
    (1..m)
        .map(|k| {
            let values: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream.child((k * samples + i) as u64).rng();
                    let u = ensemble.sample(&mut rng);
                    let mut subset = index::sample(&mut rng, m, k).into_vec();
                    subset.sort_unstable();
                    renyi2_entropy(&evolve_reduced(&sigma, &u, &subset)?)
                })
                .collect::<Result<_>>()?;
            let (mean_s2, stderr) = crate::stats::mean_and_stderr(&values);
            Ok(PagePoint { k, mean_s2, stderr })
        })
        .collect()
}

/// Writes a page curve as CSV with its provenance columns.
pub fn write_page_curve_csv<W: Write>(
    writer: W,
    points: &[PagePoint],
    ensemble_tag: &str,
    m: usize,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Validity(format!("csv output failed: {e}"));
    w.write_record(["k", "mean_S2", "stderr", "ensemble", "M", "r", "samples", "seed"]).map_err(io)?;
    for p in points {
        w.write_record([
            p.k.to_string(),
            p.mean_s2.to_string(),
            p.stderr.to_string(),
            ensemble_tag.to_string(),
            m.to_string(),
            r.to_string(),
            samples.to_string(),
            seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Validity(format!("csv output failed: {e}")))?;
    Ok(())
}
