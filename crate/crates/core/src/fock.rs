//! Fock-state boson sampling: output probabilities, outcome enumeration,
//! lightcone feasibility, permitted-outcome counting and the closed-form
//! ratio and depth-threshold formulas.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{self, CircuitArchitecture, Lightcone};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::matching;
use crate::matfn::{self, SubmatrixSelector};

/// Largest outcome space the exact counters will enumerate.
pub const ENUMERATION_GUARD: u128 = 100_000_000;

/// Photon positions as a sorted multiset of modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockPattern {
    modes: Vec<usize>,
}

impl FockPattern {
    pub fn new(mut modes: Vec<usize>) -> Self {
        modes.sort_unstable();
        Self { modes }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn photon_count(&self) -> usize {
        self.modes.len()
    }

    pub fn is_collision_free(&self) -> bool {
        self.modes.windows(2).all(|w| w[0] < w[1])
    }

    /// `s!`: product of the factorials of the mode occupations.
    pub fn multiplicity_factorial(&self) -> f64 {
        let mut out = 1.0;
        let mut run = 1.0;
        for w in self.modes.windows(2) {
            if w[0] == w[1] {
                run += 1.0;
                out *= run;
            } else {
                run = 1.0;
            }
        }
        out
    }

    /// Occupation number of every mode.
    pub fn occupations(&self, m: usize) -> Vec<usize> {
        let mut occ = vec![0; m];
        for &i in &self.modes {
            occ[i] += 1;
        }
        occ
    }

    pub(crate) fn check_bounds(&self, m: usize) -> Result<()> {
        match self.modes.last() {
            Some(&top) if top >= m => Err(Error::Index { index: top, bound: m }),
            _ => Ok(()),
        }
    }
}

impl From<Vec<usize>> for FockPattern {
    fn from(modes: Vec<usize>) -> Self {
        Self::new(modes)
    }
}

/// Counts of permitted outcomes next to their analytic upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermittedCountReport {
    pub exact_count: u64,
    pub upper_bound: u128,
    pub total_outcomes: u128,
    pub delta_exact: f64,
    pub delta_bound: f64,
    /// Closed-form per-source cone size used by the effective-lightcone count.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cone_size_bound: Option<f64>,
}

impl PermittedCountReport {
    fn new(exact_count: u64, upper_bound: u128, total_outcomes: u128) -> Self {
        let total = total_outcomes as f64;
        Self {
            exact_count,
            upper_bound,
            total_outcomes,
            delta_exact: exact_count as f64 / total,
            delta_bound: (upper_bound as f64 / total).min(1.0),
            cone_size_bound: None,
        }
    }
}

/// Which of the two sampling schemes a threshold report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Fock,
    Gaussian,
}

/// Depth thresholds below which most outcomes are forbidden (any ensemble)
/// or easy to estimate (local random ensemble).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthThresholdReport {
    pub scheme: Scheme,
    /// Prefactor of the any-ensemble threshold.
    pub kappa: f64,
    /// Prefactor of the local-random-ensemble threshold.
    pub alpha: f64,
    pub threshold_any_ensemble: f64,
    pub threshold_local_random: f64,
    /// Additive-error scale, `N!/M^N` (Fock) or `(2n)!/M^{2n}` (Gaussian).
    pub epsilon: f64,
    /// Polynomial prefactor applied to `epsilon`; fixed to 1.
    pub poly_factor: f64,
    pub photons: usize,
    pub gamma: f64,
    pub c_const: f64,
    pub lambda: f64,
    pub beta: f64,
    pub d: usize,
}

pub(crate) fn check_threshold_params(lambda: f64, beta: f64, gamma: f64, c: f64, d: usize, n: usize) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Parameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(gamma >= 1.0) {
        return Err(Error::Parameter(format!("gamma must be at least 1, got {gamma}")));
    }
    if !(c > 0.0) {
        return Err(Error::Parameter(format!("scaling constant must be positive, got {c}")));
    }
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Parameter("photon number must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `p_s = |Per(U_{s,t})|^2 / s!`.
pub fn fbs_probability(u: &ComplexMatrix, input: &FockPattern, output: &FockPattern) -> Result<f64> {
    if input.photon_count() != output.photon_count() {
        return Err(Error::Arity(format!(
            "{} input photons but {} output photons",
            input.photon_count(),
            output.photon_count()
        )));
    }
    if !input.is_collision_free() {
        return Err(Error::Arity("input pattern must be collision-free".into()));
    }
    input.check_bounds(u.cols())?;
    output.check_bounds(u.rows())?;
    let sub = matfn::select_submatrix(u, &SubmatrixSelector::new(output.modes.clone(), input.modes.clone()))?;
    Ok(matfn::permanent(&sub)?.norm_sqr() / output.multiplicity_factorial())
}

/// `binom(m + n - 1, n)`, saturating at `u128::MAX`.
pub fn outcome_count(m: usize, n: usize) -> u128 {
    if m == 0 {
        return if n == 0 { 1 } else { 0 };
    }
    binomial((m + n - 1) as u128, n as u128)
}

pub(crate) fn binomial(top: u128, k: u128) -> u128 {
    if k > top {
        return 0;
    }
    let k = k.min(top - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (top - i) / (i + 1) stays integral at every step
        match acc.checked_mul(top - i) {
            Some(v) => acc = v / (i + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// Lazily yields every non-decreasing `n`-tuple over `m` modes in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct Outcomes {
    m: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for Outcomes {
    type Item = FockPattern;

    fn next(&mut self) -> Option<FockPattern> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if let Some(i) = succ.iter().rposition(|&v| v + 1 < self.m) {
            let v = succ[i] + 1;
            succ[i..].iter_mut().for_each(|x| *x = v);
            self.next = Some(succ);
        }
        Some(FockPattern { modes: current })
    }
}

pub fn enumerate_outcomes(m: usize, n: usize) -> Outcomes {
    enumerate_outcomes_from(0, m, n)
}

/// Non-decreasing `n`-tuples with every entry in `lo..m`.
fn enumerate_outcomes_from(lo: usize, m: usize, n: usize) -> Outcomes {
    let next = if n == 0 || lo < m { Some(vec![lo; n]) } else { None };
    Outcomes { m, next }
}

fn guard_outcomes(m: usize, n: usize) -> Result<u128> {
    let total = outcome_count(m, n);
    if total > ENUMERATION_GUARD {
        return Err(Error::Guard { what: "outcome count", actual: total, limit: ENUMERATION_GUARD });
    }
    Ok(total)
}

/// Counts outcomes accepted by `permitted`, sharded by the first photon's mode.
pub(crate) fn count_outcomes<F>(m: usize, n: usize, permitted: F) -> u64
where
    F: Fn(&[usize]) -> bool + Sync,
{
    if n == 0 {
        return u64::from(permitted(&[]));
    }
    (0..m)
        .into_par_iter()
        .map(|first| {
            enumerate_outcomes_from(first, m, n - 1)
                .filter(|tail| {
                    let mut s = Vec::with_capacity(n);
                    s.push(first);
                    s.extend_from_slice(tail.modes());
                    permitted(&s)
                })
                .count() as u64
        })
        .sum()
}

fn cone_masks(cones: &[Lightcone], m: usize) -> Vec<Vec<bool>> {
    cones
        .iter()
        .map(|c| {
            let mut mask = vec![false; m];
            c.modes.iter().for_each(|&i| mask[i] = true);
            mask
        })
        .collect()
}

/// Photon `j` may end at output slot `k` iff `masks[j][s_k]`.
fn sources_cover(masks: &[Vec<bool>], output: &[usize]) -> bool {
    let adj: Vec<Vec<usize>> = masks
        .iter()
        .map(|mask| (0..output.len()).filter(|&k| mask[output[k]]).collect())
        .collect();
    if adj.iter().any(Vec::is_empty) {
        return false;
    }
    matching::hopcroft_karp(&adj, output.len()) == masks.len()
}

fn check_input(arch: &CircuitArchitecture, input: &FockPattern) -> Result<()> {
    if !input.is_collision_free() {
        return Err(Error::Arity("input pattern must be collision-free".into()));
    }
    input.check_bounds(arch.mode_count())
}

fn forward_cones(arch: &CircuitArchitecture, input: &FockPattern, depth: usize) -> Result<Vec<Lightcone>> {
    input.modes.iter().map(|&t| arch::forward_lightcone(arch, t, depth)).collect()
}

/// Whether some assignment of input photons to output photons keeps every
/// photon inside its source's forward lightcone.
pub fn is_permitted_fbs(
    arch: &CircuitArchitecture,
    input: &FockPattern,
    output: &FockPattern,
    depth: usize,
) -> Result<bool> {
    check_input(arch, input)?;
    output.check_bounds(arch.mode_count())?;
    if input.photon_count() != output.photon_count() {
        return Err(Error::Arity("input and output photon numbers differ".into()));
    }
    let masks = cone_masks(&forward_cones(arch, input, depth)?, arch.mode_count());
    Ok(sources_cover(&masks, &output.modes))
}

fn product_of_sizes(cones: &[Lightcone]) -> u128 {
    cones.iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
}

/// Exact number of permitted outcomes and the product-of-lightcones bound.
pub fn count_permitted_fbs(
    arch: &CircuitArchitecture,
    input: &FockPattern,
    depth: usize,
) -> Result<PermittedCountReport> {
    check_input(arch, input)?;
    let m = arch.mode_count();
    let total = guard_outcomes(m, input.photon_count())?;
    let cones = forward_cones(arch, input, depth)?;
    let masks = cone_masks(&cones, m);
    let exact = count_outcomes(m, input.photon_count(), |s| sources_cover(&masks, s));
    Ok(PermittedCountReport::new(exact, product_of_sizes(&cones), total))
}

/// As [`count_permitted_fbs`] with each lightcone clipped to the effective
/// radius. The reported bound is the product of clipped cone sizes; the
/// closed-form per-source size goes in `cone_size_bound`.
pub fn effective_delta_fbs(
    arch: &CircuitArchitecture,
    input: &FockPattern,
    depth: usize,
    lambda: f64,
    beta: f64,
) -> Result<PermittedCountReport> {
    check_input(arch, input)?;
    let m = arch.mode_count();
    let n = input.photon_count();
    let total = guard_outcomes(m, n)?;
    let geometry = arch.geometry();
    let d = geometry.dim();
    let radius = arch::effective_lightcone_radius(n, depth, lambda, beta, d)?;
    let cones: Vec<Lightcone> = input
        .modes
        .iter()
        .map(|&t| arch::effective_forward_lightcone(arch, &geometry, t, depth, radius))
        .collect::<Result<_>>()?;
    let masks = cone_masks(&cones, m);
    let exact = count_outcomes(m, n, |s| sources_cover(&masks, s));
    let mut report = PermittedCountReport::new(exact, product_of_sizes(&cones), total);
    let raw = 2.0 * (n as f64).powf(lambda) * depth as f64 / (beta * d as f64);
    report.cone_size_bound = Some(raw.powf(d as f64 / 2.0));
    Ok(report)
}

/// `3 sqrt(N) (2^d D^d N^{1-γ} / (e d^d c0))^N`, the closed-form bound on the
/// permitted-outcome ratio of a `d`-dimensional local circuit.
pub fn lightcone_delta_bound(m: usize, n: usize, gamma: f64, c0: f64, d: usize, depth: f64) -> Result<f64> {
    check_scaling(m, n, gamma, c0)?;
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    let (nf, df) = (n as f64, d as f64);
    let base = 2f64.powf(df) * depth.powf(df) * nf.powf(1.0 - gamma) / (E * df.powf(df) * c0);
    Ok(3.0 * nf.sqrt() * base.powf(nf))
}

/// `m` must equal `c0 n^γ` up to rounding.
pub(crate) fn check_scaling(m: usize, n: usize, gamma: f64, c0: f64) -> Result<()> {
    if n == 0 || !(c0 > 0.0) || !(gamma >= 1.0) {
        return Err(Error::Parameter(format!("need n >= 1, c > 0, gamma >= 1 (n={n}, c={c0}, gamma={gamma})")));
    }
    let predicted = c0 * (n as f64).powf(gamma);
    if (predicted - m as f64).abs() > 0.5 + 1e-9 * predicted {
        return Err(Error::Parameter(format!(
            "m = {m} is inconsistent with c * n^gamma = {predicted:.3}"
        )));
    }
    Ok(())
}

/// Depth thresholds and additive-error scale for Fock-state sampling with
/// `M = c0 N^γ` modes.
pub fn fock_depth_thresholds(
    n: usize,
    gamma: f64,
    c0: f64,
    d: usize,
    lambda: f64,
    beta: f64,
) -> Result<DepthThresholdReport> {
    check_threshold_params(lambda, beta, gamma, c0, d, n)?;
    let (nf, df) = (n as f64, d as f64);
    let kappa = (E * c0).powf(1.0 / df) * df / 2.0;
    let alpha = (E * c0).powf(2.0 / df) * beta * df / 2.0;
    let ln_m = c0.ln() + gamma * nf.ln();
    Ok(DepthThresholdReport {
        scheme: Scheme::Fock,
        kappa,
        alpha,
        threshold_any_ensemble: kappa * nf.powf((gamma - 1.0) / df),
        threshold_local_random: alpha * nf.powf(2.0 * (gamma - 1.0) / df - lambda),
        epsilon: (ln_factorial(n) - nf * ln_m).exp(),
        poly_factor: 1.0,
        photons: n,
        gamma,
        c_const: c0,
        lambda,
        beta,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build_local_parallel, build_nlhs, realize};
    use crate::linalg::{haar_unitary, RngStream};

    fn pat(v: &[usize]) -> FockPattern {
        FockPattern::new(v.to_vec())
    }

    /// Brute-force feasibility: try every assignment of outputs to inputs.
    fn permitted_by_permutations(cones: &[Lightcone], output: &[usize]) -> bool {
        fn go(j: usize, cones: &[Lightcone], output: &[usize], used: &mut [bool]) -> bool {
            if j == cones.len() {
                return true;
            }
            (0..output.len()).any(|k| {
                if used[k] || !cones[j].contains(output[k]) {
                    return false;
                }
                used[k] = true;
                let ok = go(j + 1, cones, output, used);
                used[k] = false;
                ok
            })
        }
        go(0, cones, output, &mut vec![false; output.len()])
    }

    #[test]
    fn identity_probabilities() {
        let u = ComplexMatrix::identity(5);
        let t = pat(&[0, 2, 3]);
        assert!((fbs_probability(&u, &t, &t).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fbs_probability(&u, &t, &pat(&[0, 2, 4])).unwrap(), 0.0);
        assert_eq!(fbs_probability(&u, &t, &pat(&[0, 0, 3])).unwrap(), 0.0);
        assert!(matches!(fbs_probability(&u, &t, &pat(&[0, 1])), Err(Error::Arity(_))));
    }

    #[test]
    fn probabilities_normalise() {
        let mut rng = RngStream::new(12, 0).rng();
        for (m, n) in [(6usize, 2usize), (5, 3), (4, 4), (8, 3)] {
            let u = haar_unitary(m, &mut rng).unwrap();
            let t = FockPattern::new((0..n).collect());
            let total: f64 = enumerate_outcomes(m, n).map(|s| fbs_probability(&u, &t, &s).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "m={m} n={n} total={total}");
        }
        assert_eq!(enumerate_outcomes(6, 2).count(), 21);
    }

    #[test]
    fn enumeration_order_and_counts() {
        let got: Vec<Vec<usize>> = enumerate_outcomes(3, 2).map(|p| p.modes().to_vec()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]);
        assert_eq!(enumerate_outcomes(7, 0).collect::<Vec<_>>(), vec![FockPattern::new(vec![])]);
        assert_eq!(outcome_count(64, 8), 10_639_125_640);
        for (m, n) in [(1, 5), (4, 3), (9, 2), (5, 5)] {
            assert_eq!(enumerate_outcomes(m, n).count() as u128, outcome_count(m, n));
        }
    }

    #[test]
    fn multiplicity_factorial_values() {
        assert_eq!(pat(&[0, 1, 2]).multiplicity_factorial(), 1.0);
        assert_eq!(pat(&[3, 3, 1, 3, 1]).multiplicity_factorial(), 12.0);
    }

    #[test]
    fn feasibility_examples() {
        let a = build_local_parallel(1, &[4], 3).unwrap();
        assert!(!is_permitted_fbs(&a, &pat(&[0]), &pat(&[3]), 1).unwrap());
        assert!(is_permitted_fbs(&a, &pat(&[0]), &pat(&[3]), 3).unwrap());
        for depth in 0..=3 {
            assert!(is_permitted_fbs(&a, &pat(&[1, 2]), &pat(&[1, 2]), depth).unwrap());
        }
        let h = build_nlhs(3, 1).unwrap();
        for s in enumerate_outcomes(8, 2) {
            assert!(is_permitted_fbs(&h, &pat(&[2, 5]), &s, 3).unwrap());
        }
    }

    #[test]
    fn hopcroft_karp_agrees_with_permutation_search() {
        let a = build_local_parallel(1, &[7], 4).unwrap();
        for depth in 0..=4 {
            let t = pat(&[0, 3, 6]);
            let cones = forward_cones(&a, &t, depth).unwrap();
            for s in enumerate_outcomes(7, 3) {
                assert_eq!(
                    is_permitted_fbs(&a, &t, &s, depth).unwrap(),
                    permitted_by_permutations(&cones, s.modes())
                );
            }
        }
    }

    #[test]
    fn count_examples() {
        let a = build_local_parallel(1, &[8], 8).unwrap();
        let r = count_permitted_fbs(&a, &pat(&[0, 7]), 1).unwrap();
        assert_eq!(r.exact_count, 4);
        assert_eq!(r.upper_bound, 4);
        assert_eq!(r.total_outcomes, 36);

        let full = count_permitted_fbs(&a, &pat(&[0, 7]), 8).unwrap();
        assert_eq!(full.exact_count as u128, full.total_outcomes);
        assert_eq!(full.delta_exact, 1.0);

        for depth in 0..=8 {
            for t in [pat(&[0, 1]), pat(&[2, 5, 6]), pat(&[3])] {
                let r = count_permitted_fbs(&a, &t, depth).unwrap();
                assert!(r.exact_count as u128 <= r.upper_bound);
                assert!(r.delta_exact <= r.delta_bound);
            }
        }
    }

    #[test]
    fn count_guard() {
        let a = build_nlhs(6, 1).unwrap();
        let err = count_permitted_fbs(&a, &FockPattern::new((0..8).collect()), 6).unwrap_err();
        assert!(err.is_guard());
    }

    #[test]
    fn nullity_on_realized_circuits() {
        let a = build_local_parallel(1, &[6], 3).unwrap();
        let mut rng = RngStream::new(2, 2).rng();
        let t = pat(&[0, 5]);
        for depth in 1..=3 {
            let sub = a.prefix(depth).unwrap();
            let u = realize(&sub, &mut rng);
            for s in enumerate_outcomes(6, 2) {
                if !is_permitted_fbs(&a, &t, &s, depth).unwrap() {
                    assert!(fbs_probability(&u, &t, &s).unwrap() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn effective_counts() {
        let a = build_local_parallel(1, &[16], 4).unwrap();
        let t = pat(&[3, 12]);
        let eff = effective_delta_fbs(&a, &t, 4, 0.5, 0.5).unwrap();
        let plain = count_permitted_fbs(&a, &t, 4).unwrap();
        assert!(eff.exact_count <= plain.exact_count);
        assert!(eff.exact_count as u128 <= eff.upper_bound);

        // independent recount with explicitly clipped cones
        let radius = arch::effective_lightcone_radius(2, 4, 0.5, 0.5, 1).unwrap();
        assert_eq!(radius, 5);
        let geom = a.geometry();
        let cones: Vec<Lightcone> = t
            .modes()
            .iter()
            .map(|&i| Lightcone {
                modes: arch::forward_lightcone(&a, i, 4)
                    .unwrap()
                    .modes
                    .into_iter()
                    .filter(|&j| geom.distance(i, j) <= radius)
                    .collect(),
            })
            .collect();
        let brute = enumerate_outcomes(16, 2).filter(|s| permitted_by_permutations(&cones, s.modes())).count();
        assert_eq!(eff.exact_count as usize, brute);
        assert!((eff.delta_exact - brute as f64 / 136.0).abs() < 1e-15);
        let raw: f64 = 2.0 * 2f64.sqrt() * 4.0 / 0.5;
        assert!((eff.cone_size_bound.unwrap() - raw.sqrt()).abs() < 1e-12);

        // deep circuits outgrow the effective radius
        let deep = build_local_parallel(1, &[16], 16).unwrap();
        let tight = effective_delta_fbs(&deep, &t, 16, 0.01, 0.99).unwrap();
        assert!(tight.exact_count < count_permitted_fbs(&deep, &t, 16).unwrap().exact_count);
    }

    #[test]
    fn effective_equals_plain_when_radius_covers_lattice() {
        let a = build_local_parallel(1, &[6], 3).unwrap();
        let t = pat(&[1, 4]);
        let eff = effective_delta_fbs(&a, &t, 3, 2.0, 0.1).unwrap();
        let plain = count_permitted_fbs(&a, &t, 3).unwrap();
        assert_eq!(eff.exact_count, plain.exact_count);
        assert_eq!(eff.upper_bound, plain.upper_bound);
    }

    #[test]
    fn delta_bound_at_threshold() {
        // at the any-ensemble threshold the bracket is exactly one
        for (n, gamma, c0, d) in [(4usize, 2.0, 1.0, 1usize), (9, 2.0, 2.0, 2), (5, 1.5, 3.0, 1)] {
            let m = (c0 * (n as f64).powf(gamma)).round() as usize;
            let rep = fock_depth_thresholds(n, gamma, c0, d, 0.1, 0.5).unwrap();
            let at = lightcone_delta_bound(m, n, gamma, c0, d, rep.threshold_any_ensemble).unwrap();
            let expect = 3.0 * (n as f64).sqrt();
            assert!((at - expect).abs() < 1e-9 * expect, "{at} vs {expect}");
            // half the threshold depth shrinks it by 2^{-dN}
            let half = lightcone_delta_bound(m, n, gamma, c0, d, rep.threshold_any_ensemble / 2.0).unwrap();
            assert!((half / at - 0.5f64.powi((d * n) as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn delta_bound_monotone_and_dominates_counts() {
        let mut last = 0.0;
        for depth in 1..10 {
            let b = lightcone_delta_bound(16, 4, 2.0, 1.0, 1, depth as f64).unwrap();
            assert!(b > last);
            last = b;
        }
        assert!(lightcone_delta_bound(17, 4, 2.0, 1.0, 1, 2.0).is_err());

        let a = build_local_parallel(1, &[16], 8).unwrap();
        let t = pat(&[1, 6, 10, 14]);
        for depth in 1..=8 {
            let r = count_permitted_fbs(&a, &t, depth).unwrap();
            let bound = lightcone_delta_bound(16, 4, 2.0, 1.0, 1, depth as f64).unwrap();
            assert!(r.delta_exact <= bound, "depth {depth}: {} vs {bound}", r.delta_exact);
        }
    }

    #[test]
    fn threshold_values() {
        let r = fock_depth_thresholds(16, 2.0, 1.0, 1, 0.1, 0.5).unwrap();
        assert!((r.alpha - E * E * 0.25).abs() < 1e-12);
        assert!((r.alpha - 1.847_264_024_732_662_4).abs() < 1e-12);
        assert!((r.threshold_local_random - r.alpha * 16f64.powf(1.9)).abs() < 1e-9);
        assert!((r.kappa - E / 2.0).abs() < 1e-15);
        // epsilon = 16!/256^16
        let eps = (1..=16).map(|k| k as f64).product::<f64>() / 256f64.powi(16);
        assert!((r.epsilon - eps).abs() < 1e-10 * eps);

        let r2 = fock_depth_thresholds(32, 2.0, 1.0, 1, 0.1, 0.5).unwrap();
        assert!((r2.threshold_any_ensemble / r.threshold_any_ensemble - 2.0).abs() < 1e-12);
        assert!((r2.threshold_local_random / r.threshold_local_random - 2f64.powf(1.9)).abs() < 1e-12);

        assert!(fock_depth_thresholds(16, 2.0, 1.0, 1, 0.1, 1.5).is_err());
        assert!(fock_depth_thresholds(16, 2.0, 1.0, 1, 0.0, 0.5).is_err());
    }
}
