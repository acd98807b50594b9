//! Monte-Carlo statistics: equal-count density curves, frame potentials,
//! bootstrap errors, random patterns, hiding samples and two-sample KS.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::Ensemble;
use crate::error::{Error, Result};
use crate::fock::FockPattern;
use crate::linalg::{self, ComplexMatrix, RngStream};
use crate::matfn::{self, SubmatrixSelector};

pub const DEFAULT_BUCKETS: usize = 20;
pub const DEFAULT_PROBABILITY_SAMPLES: usize = 10_000;
pub const DEFAULT_FRAME_SAMPLES: usize = 50_000;
pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Midpoint of the bucket's sample range.
    pub x: f64,
    /// `(count / total) / width`; `None` when every sample in the bucket is equal.
    pub density: Option<f64>,
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Bucket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.density.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub buckets: Vec<Bucket>,
    pub total_samples: usize,
}

/// Sorts the samples and splits them into `n_buckets` runs of equal size,
/// earlier buckets absorbing the remainder.
pub fn density_function(samples: &[f64], n_buckets: usize) -> Result<DensityCurve> {
    if samples.is_empty() || n_buckets == 0 {
        return Err(Error::Parameter("density needs samples and at least one bucket".into()));
    }
    if n_buckets > samples.len() {
        return Err(Error::Parameter(format!("{n_buckets} buckets for {} samples", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len();
    let (base, extra) = (total / n_buckets, total % n_buckets);
    let mut start = 0;
    let buckets = (0..n_buckets)
        .map(|b| {
            let count = base + usize::from(b < extra);
            let run = &sorted[start..start + count];
            start += count;
            let (lo, hi) = (run[0], run[count - 1]);
            let width = hi - lo;
            Bucket {
                x: 0.5 * (lo + hi),
                density: (width > 0.0).then(|| count as f64 / total as f64 / width),
                count,
                lo,
                hi,
            }
        })
        .collect();
    Ok(DensityCurve { buckets, total_samples: total })
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard deviation of the means of `resamples` with-replacement resamples.
pub fn bootstrap_std<R: Rng + ?Sized>(samples: &[f64], resamples: usize, rng: &mut R) -> Result<f64> {
    if samples.len() < 2 || resamples < 2 {
        return Err(Error::Parameter("bootstrap needs two samples and two resamples".into()));
    }
    let n = samples.len();
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mu = means.iter().sum::<f64>() / resamples as f64;
    Ok((means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePotentialEstimate {
    pub k_moment: usize,
    pub raw_mean: f64,
    /// `raw_mean / k!`, equal to one for the Haar ensemble.
    pub normalized: f64,
    /// Bootstrap error of `normalized`.
    pub bootstrap_std: f64,
    pub n_sam: usize,
}

/// Values of `|Tr(U^† V)|^{2k}` over independent pairs drawn from `sample`.
pub fn frame_potential_values<F>(sample: F, k: usize, n_sam: usize, stream: &RngStream) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> ComplexMatrix + Sync,
{
    (0..n_sam)
        .into_par_iter()
        .map(|i| {
            let u = sample(&mut stream.child(2 * i as u64).rng());
            let v = sample(&mut stream.child(2 * i as u64 + 1).rng());
            u.adjoint_trace_with(&v).norm_sqr().powi(k as i32)
        })
        .collect()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn frame_potential(
    ensemble: &Ensemble,
    k: usize,
    n_sam: usize,
    resamples: usize,
    stream: &RngStream,
) -> Result<FramePotentialEstimate> {
    frame_potential_with(|rng| ensemble.sample(rng), k, n_sam, resamples, stream)
}

/// Frame potential of an arbitrary seeded sampler.
pub fn frame_potential_with<F>(
    sample: F,
    k: usize,
    n_sam: usize,
    resamples: usize,
    stream: &RngStream,
) -> Result<FramePotentialEstimate>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> ComplexMatrix + Sync,
{
    if k == 0 || n_sam < 2 {
        return Err(Error::Parameter("frame potential needs k >= 1 and at least two samples".into()));
    }
    let norm = factorial(k);
    let values: Vec<f64> = frame_potential_values(sample, k, n_sam, stream).into_iter().map(|v| v / norm).collect();
    let normalized = values.iter().sum::<f64>() / n_sam as f64;
    // the bootstrap uses its own stream, disjoint from the per-pair children
    let mut rng = RngStream::new(stream.seed, stream.stream ^ u64::MAX).rng();
    let bootstrap = bootstrap_std(&values, resamples, &mut rng)?;
    Ok(FramePotentialEstimate {
        k_moment: k,
        raw_mean: normalized * norm,
        normalized,
        bootstrap_std: bootstrap,
        n_sam,
    })
}

/// Uniform `n`-subset of `0..m`, sorted.
pub fn random_collision_free_pattern<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<FockPattern> {
    if n > m {
        return Err(Error::Arity(format!("{n} photons on {m} modes without collision")));
    }
    Ok(FockPattern::new(index::sample(rng, m, n).into_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Fbs,
    Gbs,
}

fn check_size(kind: SamplerKind, n: usize) -> Result<()> {
    let (limit, what) = match kind {
        SamplerKind::Fbs => (matfn::PERMANENT_MAX, "permanent size"),
        SamplerKind::Gbs => (matfn::HAFNIAN_MAX, "hafnian size"),
    };
    if n > limit {
        return Err(Error::Guard { what, actual: n as u128, limit: limit as u128 });
    }
    if kind == SamplerKind::Gbs && n % 2 == 1 {
        return Err(Error::Parity(n));
    }
    Ok(())
}

/// Unnormalized output weights at random collision-free patterns of `n`
/// photons: `|Per(U_{s,t})|^2` with random `s` and `t` (FBS) or
/// `|Haf((U U^T)_s)|^2` with every mode squeezed (GBS). Each sample draws
/// a fresh unitary from the ensemble.
pub fn probability_samples(
    kind: SamplerKind,
    ensemble: &Ensemble,
    n: usize,
    n_sam: usize,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    let m = ensemble.mode_count();
    check_size(kind, n)?;
    if n > m {
        return Err(Error::Arity(format!("{n} photons on {m} modes without collision")));
    }
    (0..n_sam)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let u = ensemble.sample(&mut rng);
            let s = random_collision_free_pattern(m, n, &mut rng)?;
            match kind {
                SamplerKind::Fbs => {
                    let t = random_collision_free_pattern(m, n, &mut rng)?;
                    let sub = matfn::select_submatrix(&u, &SubmatrixSelector::new(s.modes().to_vec(), t.modes().to_vec()))?;
                    Ok(matfn::permanent(&sub)?.norm_sqr())
                }
                SamplerKind::Gbs => {
                    let rows = matfn::select_submatrix(&u, &SubmatrixSelector::new(s.modes().to_vec(), (0..m).collect()))?;
                    let b = rows.matmul(&rows.transpose())?;
                    Ok(matfn::hafnian(&b)?.norm_sqr())
                }
            }
        })
        .collect()
}

/// Gaussian-matrix stand-ins for the output weights: `|Per(X)|^2 / M^N`
/// with `X` an `N x N` Ginibre matrix, or `|Haf(X X^T)|^2 / M^N` with `X`
/// of shape `N x M`.
pub fn hiding_samples(kind: SamplerKind, m: usize, n: usize, n_sam: usize, stream: &RngStream) -> Result<Vec<f64>> {
    check_size(kind, n)?;
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimension("hiding needs at least one mode and one photon".into()));
    }
    let scale = (m as f64).powi(n as i32);
    (0..n_sam)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let value = match kind {
                SamplerKind::Fbs => matfn::permanent(&linalg::ginibre(n, n, &mut rng)?)?.norm_sqr(),
                SamplerKind::Gbs => {
                    let x = linalg::ginibre(n, m, &mut rng)?;
                    matfn::hafnian(&x.matmul(&x.transpose())?)?.norm_sqr()
                }
            };
            Ok(value / scale)
        })
        .collect()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / n - j as f64 / m).abs());
    }
    best
}

/// Asymptotic critical value `sqrt(-ln(α/2)/2) sqrt((n+m)/(nm))`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
