//! Command-line experiment runner.
//!
//! Every experiment reads an optional TOML config, applies flag overrides,
//! validates the result, computes in memory and writes its output once. A
//! sidecar `<out>.manifest.json` records the resolved config.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::arch::{self, CircuitArchitecture, Ensemble, Family};
use crate::error::Error;
use crate::fock::{self, FockPattern, PermittedCountReport};
use crate::gaussian::{self, GbsConfig};
use crate::linalg::RngStream;
use crate::stats::{self, DensityCurve, SamplerKind};

pub const THREADS_ENV: &str = "SHALLOW_BS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ArchInfo,
    PermittedCount,
    Thresholds,
    DensityFbs,
    DensityGbs,
    PageCurve,
    FramePotential,
    Hiding,
}

impl ExperimentKind {
    fn name(self) -> &'static str {
        match self {
            Self::ArchInfo => "arch-info",
            Self::PermittedCount => "permitted-count",
            Self::Thresholds => "thresholds",
            Self::DensityFbs => "density-fbs",
            Self::DensityGbs => "density-gbs",
            Self::PageCurve => "page-curve",
            Self::FramePotential => "frame-potential",
            Self::Hiding => "hiding",
        }
    }

    fn is_stochastic(self) -> bool {
        !matches!(self, Self::ArchInfo | Self::PermittedCount | Self::Thresholds)
    }

    fn needs_ensemble(self) -> bool {
        !matches!(self, Self::Thresholds | Self::Hiding)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    LocalParallel,
    Nlhs,
    Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Fock,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Fbs,
    Gbs,
}

impl From<KindArg> for SamplerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Fbs => SamplerKind::Fbs,
            KindArg::Gbs => SamplerKind::Gbs,
        }
    }
}

/// Every experiment parameter. Unset fields fall back to per-experiment
/// defaults; the config file and the flags share these names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    /// Circuit ensemble.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleKind>,
    /// Mode count M.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    /// Lattice dimension d.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Lattice side lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<usize>>,
    /// Circuit depth D.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// NLHS rounds C.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// Photon number N.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photons: Option<usize>,
    /// Photon pairs n for the Gaussian scheme (default N/2).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    /// Input modes, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<usize>>,
    /// Squeezed input count K.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_inputs: Option<usize>,
    /// Squeezing parameter r.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub squeeze: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<usize>,
    /// Frame-potential moment k.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_moment: Option<usize>,
    /// Bootstrap resamples.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resamples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Scaling constant c in M = c N^gamma.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_const: Option<f64>,
    /// Sampling scheme for permitted-count.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeArg>,
    /// Sampler for hiding.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<KindArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Result file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl ExperimentConfig {
    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            experiment, ensemble, modes, dim, sides, depth, rounds, photons, pairs, input, k_inputs, squeeze,
            samples, buckets, k_moment, resamples, lambda, beta, gamma, c_const, scheme, kind, seed, out, format
        );
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Args)]
struct Invocation {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(flatten)]
    params: ExperimentConfig,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gate schedule summary and lightcone sizes.
    ArchInfo(Invocation),
    /// Exact permitted-outcome count against its analytic bound.
    PermittedCount(Invocation),
    /// Depth thresholds of both sampling schemes.
    Thresholds(Invocation),
    /// Density curve of Fock-state output weights.
    DensityFbs(Invocation),
    /// Density curve of Gaussian output weights.
    DensityGbs(Invocation),
    /// Rényi-2 entropy against subsystem size.
    PageCurve(Invocation),
    /// Frame-potential estimate with bootstrap error.
    FramePotential(Invocation),
    /// Gaussian-matrix surrogate weights against Haar weights.
    Hiding(Invocation),
}

impl Command {
    fn split(self) -> (ExperimentKind, Invocation) {
        match self {
            Command::ArchInfo(i) => (ExperimentKind::ArchInfo, i),
            Command::PermittedCount(i) => (ExperimentKind::PermittedCount, i),
            Command::Thresholds(i) => (ExperimentKind::Thresholds, i),
            Command::DensityFbs(i) => (ExperimentKind::DensityFbs, i),
            Command::DensityGbs(i) => (ExperimentKind::DensityGbs, i),
            Command::PageCurve(i) => (ExperimentKind::PageCurve, i),
            Command::FramePotential(i) => (ExperimentKind::FramePotential, i),
            Command::Hiding(i) => (ExperimentKind::Hiding, i),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "shallow-bs", version, about = "Shallow-depth boson-sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// How a run failed, and its process exit code.
#[derive(Debug)]
pub enum Failure {
    Invalid(Vec<String>),
    Guard(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Guard(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Failure::Invalid(d) => json!({ "error": "invalid-config", "diagnostics": d }),
            Failure::Guard(m) => json!({ "error": "resource-guard", "message": m }),
            Failure::Io(m) => json!({ "error": "io", "message": m }),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_guard() {
            Failure::Guard(format!("{e}; reduce modes or photons"))
        } else {
            Failure::Invalid(vec![e.to_string()])
        }
    }
}

const DEFAULT_GAMMA: f64 = 2.0;
const DEFAULT_C: f64 = 1.0;
const DEFAULT_LAMBDA: f64 = 0.1;
const DEFAULT_BETA: f64 = 0.5;
const DEFAULT_SQUEEZE: f64 = 0.4;

/// The config with every default this experiment uses filled in.
pub fn resolve(kind: ExperimentKind, cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut r = cfg.clone();
    r.experiment = Some(kind);
    r.format.get_or_insert(Format::Csv);
    if kind.needs_ensemble() {
        match r.ensemble {
            Some(EnsembleKind::LocalParallel) => {
                let dim = *r.dim.get_or_insert(1);
                if r.sides.is_none() {
                    if let Some(m) = r.modes {
                        if let Some(side) = integer_root(m, dim) {
                            r.sides = Some(vec![side; dim]);
                        }
                    }
                }
                if r.modes.is_none() {
                    r.modes = r.sides.as_ref().map(|s| s.iter().product());
                }
            }
            Some(EnsembleKind::Nlhs) => {
                r.rounds.get_or_insert(1);
            }
            _ => {}
        }
    }
    match kind {
        ExperimentKind::ArchInfo => {}
        ExperimentKind::PermittedCount => {
            let scheme = *r.scheme.get_or_insert(SchemeArg::Fock);
            if scheme == SchemeArg::Gaussian {
                if let (None, Some(n)) = (r.pairs, r.photons) {
                    r.pairs = Some(n / 2);
                }
                if r.k_inputs.is_none() {
                    r.k_inputs = r.modes;
                }
                r.squeeze.get_or_insert(DEFAULT_SQUEEZE);
            }
        }
        ExperimentKind::Thresholds => {
            r.gamma.get_or_insert(DEFAULT_GAMMA);
            r.c_const.get_or_insert(DEFAULT_C);
            r.lambda.get_or_insert(DEFAULT_LAMBDA);
            r.beta.get_or_insert(DEFAULT_BETA);
            r.dim.get_or_insert(1);
            if let (None, Some(n)) = (r.pairs, r.photons) {
                r.pairs = Some(n / 2);
            }
        }
        ExperimentKind::DensityFbs | ExperimentKind::DensityGbs => {
            r.samples.get_or_insert(stats::DEFAULT_PROBABILITY_SAMPLES);
            r.buckets.get_or_insert(stats::DEFAULT_BUCKETS);
        }
        ExperimentKind::PageCurve => {
            r.squeeze.get_or_insert(DEFAULT_SQUEEZE);
            r.samples.get_or_insert(200);
        }
        ExperimentKind::FramePotential => {
            r.k_moment.get_or_insert(2);
            r.samples.get_or_insert(stats::DEFAULT_FRAME_SAMPLES);
            r.resamples.get_or_insert(stats::DEFAULT_RESAMPLES);
        }
        ExperimentKind::Hiding => {
            r.kind.get_or_insert(KindArg::Fbs);
            r.samples.get_or_insert(5000);
            r.buckets.get_or_insert(stats::DEFAULT_BUCKETS);
        }
    }
    r
}

fn integer_root(m: usize, d: usize) -> Option<usize> {
    if d == 0 {
        return None;
    }
    let guess = (m as f64).powf(1.0 / d as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|s| s.checked_pow(d as u32) == Some(m))
}

/// Every problem with the resolved config, without running anything.
pub fn validate(kind: ExperimentKind, cfg: &ExperimentConfig) -> Vec<String> {
    let r = resolve(kind, cfg);
    let mut out = Vec::new();
    let mut need = |ok: bool, msg: String| {
        if !ok {
            out.push(msg);
        }
    };
    if let Some(e) = cfg.experiment {
        need(e == kind, format!("config is for experiment `{}` but `{}` was requested", e.name(), kind.name()));
    }
    if kind.is_stochastic() {
        need(r.seed.is_some(), "seed is required for stochastic experiments".into());
    }
    if let Some(b) = r.beta {
        need(b > 0.0 && b < 1.0, format!("beta = {b} lies outside the open interval (0, 1)"));
    }
    if let Some(l) = r.lambda {
        need(l > 0.0, format!("lambda = {l} must be positive"));
    }
    if let Some(g) = r.gamma {
        need(g >= 1.0, format!("gamma = {g} must be at least 1"));
    }
    if let Some(c) = r.c_const {
        need(c > 0.0, format!("c-const = {c} must be positive"));
    }

    if kind.needs_ensemble() {
        match r.ensemble {
            None => need(false, "ensemble is required (local-parallel, nlhs or haar)".into()),
            Some(e) => {
                if matches!(kind, ExperimentKind::ArchInfo | ExperimentKind::PermittedCount) {
                    need(e != EnsembleKind::Haar, format!("{} needs a circuit architecture, not haar", kind.name()));
                }
                match e {
                    EnsembleKind::LocalParallel => {
                        let dim = r.dim.unwrap_or(1);
                        need(dim >= 1, "dim must be at least 1".into());
                        need(r.depth.is_some(), "depth is required for local-parallel".into());
                        match &r.sides {
                            None => need(false, "sides (or modes equal to side^dim) are required for local-parallel".into()),
                            Some(s) => {
                                need(s.len() == dim, format!("{} side lengths for dimension {dim}", s.len()));
                                need(s.iter().all(|&x| x >= 1), "side lengths must be positive".into());
                                if let Some(m) = r.modes {
                                    need(s.iter().product::<usize>() == m, format!("sides {s:?} do not give {m} modes"));
                                }
                            }
                        }
                    }
                    EnsembleKind::Nlhs => match r.modes {
                        None => need(false, "modes is required for nlhs".into()),
                        Some(m) => {
                            need(m >= 2 && m.is_power_of_two(), format!("nlhs needs a power-of-two mode count, got M = {m}"));
                            need(r.rounds.unwrap_or(1) >= 1, "rounds must be at least 1".into());
                        }
                    },
                    EnsembleKind::Haar => need(r.modes.is_some_and(|m| m >= 1), "modes is required for haar".into()),
                }
            }
        }
    }

    let m = r.modes.unwrap_or(0);
    match kind {
        ExperimentKind::ArchInfo => {}
        ExperimentKind::PermittedCount => match r.scheme.unwrap_or(SchemeArg::Fock) {
            SchemeArg::Fock => {
                match (&r.input, r.photons) {
                    (None, None) => need(false, "photons (or input) is required".into()),
                    (Some(t), n) => {
                        need(n.is_none_or(|n| n == t.len()), "input length differs from photons".into());
                        check_input_modes(t, m, &mut need);
                    }
                    (None, Some(n)) => need(n >= 1 && n <= m, format!("{n} photons do not fit {m} modes without collision")),
                }
                if r.lambda.is_some() != r.beta.is_some() {
                    need(false, "effective counting needs both lambda and beta".into());
                }
            }
            SchemeArg::Gaussian => {
                let k = r.k_inputs.unwrap_or(0);
                match r.pairs {
                    None => need(false, "pairs (or photons) is required for the gaussian scheme".into()),
                    Some(n) => need(n <= k, format!("n = {n} pairs exceed K = {k} squeezed inputs")),
                }
                need(k <= m, format!("K = {k} exceeds M = {m}"));
                if let Some(p) = r.photons {
                    need(p % 2 == 0, format!("gaussian photon number {p} must be even"));
                }
                if let Some(t) = &r.input {
                    need(t.len() == k, "input length differs from k-inputs".into());
                    check_input_modes(t, m, &mut need);
                }
                need(r.squeeze.unwrap_or(0.0) > 0.0, "squeeze must be positive".into());
            }
        },
        ExperimentKind::Thresholds => {
            need(r.photons.is_some_and(|n| n >= 2), "photons >= 2 is required".into());
            need(r.dim.is_some_and(|d| d >= 1), "dim must be at least 1".into());
        }
        ExperimentKind::DensityFbs | ExperimentKind::DensityGbs => {
            match r.photons {
                None => need(false, "photons is required".into()),
                Some(n) => {
                    need(n >= 1 && n <= m, format!("{n} photons do not fit {m} modes without collision"));
                    if kind == ExperimentKind::DensityGbs {
                        need(n % 2 == 0, format!("gaussian photon number {n} must be even"));
                    }
                }
            }
            check_sampling(&r, &mut need);
        }
        ExperimentKind::PageCurve => {
            need(m >= 2, "page curve needs at least two modes".into());
            need(r.squeeze.is_some_and(|s| s >= 0.0), "squeeze must be non-negative".into());
            need(r.samples.is_some_and(|s| s >= 1), "samples must be positive".into());
        }
        ExperimentKind::FramePotential => {
            need(r.k_moment.is_some_and(|k| k >= 1), "k-moment must be at least 1".into());
            need(r.samples.is_some_and(|s| s >= 2), "frame potential needs at least two samples".into());
            need(r.resamples.is_some_and(|s| s >= 2), "resamples must be at least 2".into());
        }
        ExperimentKind::Hiding => {
            need(r.modes.is_some_and(|m| m >= 1), "modes is required".into());
            match r.photons {
                None => need(false, "photons is required".into()),
                Some(n) => {
                    need(n >= 1 && n <= m, format!("{n} photons do not fit {m} modes without collision"));
                    if r.kind == Some(KindArg::Gbs) {
                        need(n % 2 == 0, format!("gaussian photon number {n} must be even"));
                    }
                }
            }
            check_sampling(&r, &mut need);
        }
    }
    out
}

fn check_input_modes(t: &[usize], m: usize, need: &mut impl FnMut(bool, String)) {
    let mut sorted = t.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    need(sorted.len() == t.len(), "input modes must be distinct".into());
    need(t.iter().all(|&i| i < m), format!("input modes must be below M = {m}"));
}

fn check_sampling(r: &ExperimentConfig, need: &mut impl FnMut(bool, String)) {
    let (s, b) = (r.samples.unwrap_or(0), r.buckets.unwrap_or(0));
    need(s >= 1, "samples must be positive".into());
    need(b >= 1 && b <= s, format!("buckets = {b} must lie in 1..=samples"));
}

fn build_architecture(r: &ExperimentConfig) -> Result<CircuitArchitecture, Failure> {
    let arch = match r.ensemble {
        Some(EnsembleKind::LocalParallel) => arch::build_local_parallel(
            r.dim.unwrap_or(1),
            r.sides.as_deref().unwrap_or_default(),
            r.depth.unwrap_or(0),
        )?,
        Some(EnsembleKind::Nlhs) => arch::build_nlhs_for_modes(r.modes.unwrap_or(0), r.rounds.unwrap_or(1))?,
        _ => return Err(Failure::Invalid(vec!["a circuit architecture is required".into()])),
    };
    Ok(arch)
}

fn build_ensemble(r: &ExperimentConfig) -> Result<Ensemble, Failure> {
    match r.ensemble {
        Some(EnsembleKind::Haar) => Ok(Ensemble::Haar { modes: r.modes.unwrap_or(0) }),
        _ => Ok(Ensemble::Circuit(build_architecture(r)?)),
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn json_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Runs the experiment and returns the result file's bytes.
pub fn execute(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Vec<u8>, Failure> {
    let diagnostics = validate(kind, cfg);
    if !diagnostics.is_empty() {
        return Err(Failure::Invalid(diagnostics));
    }
    let r = resolve(kind, cfg);
    let format = r.format.unwrap_or_default();
    let stream = RngStream::new(r.seed.unwrap_or(0), 0);
    match kind {
        ExperimentKind::ArchInfo => arch_info(&r, format),
        ExperimentKind::PermittedCount => permitted_count(&r, format),
        ExperimentKind::Thresholds => thresholds(&r, format),
        ExperimentKind::DensityFbs | ExperimentKind::DensityGbs => {
            let sampler = if kind == ExperimentKind::DensityFbs { SamplerKind::Fbs } else { SamplerKind::Gbs };
            let ensemble = build_ensemble(&r)?;
            let n = r.photons.unwrap_or(0);
            let samples = stats::probability_samples(sampler, &ensemble, n, r.samples.unwrap_or(0), &stream)?;
            let curve = stats::density_function(&samples, r.buckets.unwrap_or(0))?;
            let meta = [("ensemble", ensemble.tag()), ("M", ensemble.mode_count().to_string()), ("N", n.to_string())];
            Ok(density_output(&[("circuit", &curve)], &meta, &r, format))
        }
        ExperimentKind::PageCurve => {
            let ensemble = build_ensemble(&r)?;
            let (sq, samples) = (r.squeeze.unwrap_or(0.0), r.samples.unwrap_or(0));
            let points = gaussian::page_curve(&ensemble, sq, samples, &stream)?;
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    gaussian::write_page_curve_csv(
                        &mut buf,
                        &points,
                        &ensemble.tag(),
                        ensemble.mode_count(),
                        sq,
                        samples,
                        r.seed.unwrap_or(0),
                    )?;
                    Ok(buf)
                }
                Format::Json => Ok(json_bytes(&json!({
                    "ensemble": ensemble.tag(),
                    "M": ensemble.mode_count(),
                    "r": sq,
                    "samples": samples,
                    "seed": r.seed,
                    "points": points,
                }))),
            }
        }
        ExperimentKind::FramePotential => {
            let ensemble = build_ensemble(&r)?;
            let est = stats::frame_potential(
                &ensemble,
                r.k_moment.unwrap_or(2),
                r.samples.unwrap_or(0),
                r.resamples.unwrap_or(0),
                &stream,
            )?;
            match format {
                Format::Csv => Ok(csv_bytes(
                    &["k_moment", "raw_mean", "normalized", "bootstrap_std", "n_sam", "ensemble", "M", "seed"],
                    &[vec![
                        est.k_moment.to_string(),
                        est.raw_mean.to_string(),
                        est.normalized.to_string(),
                        est.bootstrap_std.to_string(),
                        est.n_sam.to_string(),
                        ensemble.tag(),
                        ensemble.mode_count().to_string(),
                        r.seed.unwrap_or(0).to_string(),
                    ]],
                )),
                Format::Json => Ok(json_bytes(&json!({
                    "estimate": est,
                    "ensemble": ensemble.tag(),
                    "M": ensemble.mode_count(),
                    "seed": r.seed,
                }))),
            }
        }
        ExperimentKind::Hiding => {
            let sampler: SamplerKind = r.kind.unwrap_or(KindArg::Fbs).into();
            let (m, n, count) = (r.modes.unwrap_or(0), r.photons.unwrap_or(0), r.samples.unwrap_or(0));
            let surrogate = stats::hiding_samples(sampler, m, n, count, &stream.child(0))?;
            let haar = stats::probability_samples(sampler, &Ensemble::Haar { modes: m }, n, count, &stream.child(1))?;
            let buckets = r.buckets.unwrap_or(0);
            let (a, b) = (stats::density_function(&surrogate, buckets)?, stats::density_function(&haar, buckets)?);
            let ks = stats::ks_statistic(&surrogate, &haar);
            let critical = stats::ks_critical_value(count, count, 0.01);
            let meta = [
                ("ensemble", "haar".to_string()),
                ("M", m.to_string()),
                ("N", n.to_string()),
                ("ks", ks.to_string()),
                ("ks_critical_1pct", critical.to_string()),
            ];
            Ok(density_output(&[("gaussian", &a), ("haar", &b)], &meta, &r, format))
        }
    }
}

fn density_output(
    curves: &[(&str, &DensityCurve)],
    meta: &[(&str, String)],
    r: &ExperimentConfig,
    format: Format,
) -> Vec<u8> {
    let samples = r.samples.unwrap_or(0).to_string();
    let seed = r.seed.unwrap_or(0).to_string();
    match format {
        Format::Csv => {
            let mut header = vec!["source", "bucket", "x", "density", "count", "lo", "hi", "degenerate"];
            header.extend(meta.iter().map(|(k, _)| *k));
            header.extend(["samples", "seed"]);
            let rows: Vec<Vec<String>> = curves
                .iter()
                .flat_map(|(source, curve)| {
                    let (samples, seed) = (&samples, &seed);
                    curve.buckets.iter().enumerate().map(move |(i, b)| {
                        let mut row = vec![
                            source.to_string(),
                            i.to_string(),
                            b.x.to_string(),
                            opt(b.density),
                            b.count.to_string(),
                            b.lo.to_string(),
                            b.hi.to_string(),
                            b.is_degenerate().to_string(),
                        ];
                        row.extend(meta.iter().map(|(_, v)| v.clone()));
                        row.extend([samples.clone(), seed.clone()]);
                        row
                    })
                })
                .collect();
            csv_bytes(&header, &rows)
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            for (k, v) in meta {
                obj.insert(k.to_string(), json!(v));
            }
            obj.insert("samples".into(), json!(r.samples));
            obj.insert("seed".into(), json!(r.seed));
            let c: serde_json::Map<String, serde_json::Value> =
                curves.iter().map(|(s, c)| (s.to_string(), json!(c))).collect();
            obj.insert("curves".into(), serde_json::Value::Object(c));
            json_bytes(&serde_json::Value::Object(obj))
        }
    }
}

fn arch_info(r: &ExperimentConfig, format: Format) -> Result<Vec<u8>, Failure> {
    let a = build_architecture(r)?;
    let depth = a.depth();
    let tag = Ensemble::Circuit(a.clone()).tag();
    let cones: Vec<[usize; 4]> = (0..a.mode_count())
        .map(|i| {
            Ok([
                i,
                arch::forward_lightcone(&a, i, depth)?.len(),
                arch::backward_lightcone(&a, i, depth)?.len(),
                arch::round_trip_lightcone(&a, i, depth)?.len(),
            ])
        })
        .collect::<Result<_, Error>>()?;
    match format {
        Format::Csv => Ok(csv_bytes(
            &["mode", "forward", "backward", "round_trip", "ensemble", "M", "depth", "gates"],
            &cones
                .iter()
                .map(|c| {
                    let mut row: Vec<String> = c.iter().map(usize::to_string).collect();
                    row.extend([tag.clone(), a.mode_count().to_string(), depth.to_string(), a.gate_count().to_string()]);
                    row
                })
                .collect::<Vec<_>>(),
        )),
        Format::Json => {
            let family = match a.family() {
                Family::LocalParallel { dim, sides } => json!({ "family": "local-parallel", "dim": dim, "sides": sides }),
                Family::Nlhs { p, rounds } => json!({ "family": "nlhs", "p": p, "rounds": rounds }),
                Family::Custom => json!({ "family": "custom" }),
            };
            Ok(json_bytes(&json!({
                "ensemble": tag,
                "architecture": family,
                "M": a.mode_count(),
                "depth": depth,
                "gates": a.gate_count(),
                "diameter": a.geometry().diameter(),
                "lightcones": cones
                    .iter()
                    .map(|c| json!({ "mode": c[0], "forward": c[1], "backward": c[2], "round_trip": c[3] }))
                    .collect::<Vec<_>>(),
                "layers": a.layers(),
            })))
        }
    }
}

/// `n` modes spread evenly over `0..m`.
fn spread_inputs(m: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| i * m / n).collect()
}

fn permitted_count(r: &ExperimentConfig, format: Format) -> Result<Vec<u8>, Failure> {
    let a = build_architecture(r)?;
    let depth = match r.ensemble {
        Some(EnsembleKind::Nlhs) => r.depth.unwrap_or(a.depth()),
        _ => a.depth(),
    };
    let m = a.mode_count();
    let mut reports: Vec<(&str, PermittedCountReport)> = Vec::new();
    let input: FockPattern;
    match r.scheme.unwrap_or(SchemeArg::Fock) {
        SchemeArg::Fock => {
            input = FockPattern::new(r.input.clone().unwrap_or_else(|| spread_inputs(m, r.photons.unwrap_or(0))));
            reports.push(("lightcone", fock::count_permitted_fbs(&a, &input, depth)?));
            if let (Some(lambda), Some(beta)) = (r.lambda, r.beta) {
                reports.push(("effective", fock::effective_delta_fbs(&a, &input, depth, lambda, beta)?));
            }
        }
        SchemeArg::Gaussian => {
            let cfg = GbsConfig::new(m, r.k_inputs.unwrap_or(m), r.squeeze.unwrap_or(DEFAULT_SQUEEZE), r.pairs.unwrap_or(0))?;
            input = FockPattern::new(r.input.clone().unwrap_or_else(|| (0..cfg.k_inputs).collect()));
            reports.push(("pair-source", gaussian::count_permitted_gbs(&a, &cfg, &input, depth)?));
        }
    }
    let tag = Ensemble::Circuit(a.clone()).tag();
    match format {
        Format::Csv => Ok(csv_bytes(
            &[
                "count",
                "exact_count",
                "upper_bound",
                "total_outcomes",
                "delta_exact",
                "delta_bound",
                "cone_size_bound",
                "ensemble",
                "M",
                "depth",
                "input",
            ],
            &reports
                .iter()
                .map(|(name, rep)| {
                    vec![
                        name.to_string(),
                        rep.exact_count.to_string(),
                        rep.upper_bound.to_string(),
                        rep.total_outcomes.to_string(),
                        rep.delta_exact.to_string(),
                        rep.delta_bound.to_string(),
                        opt(rep.cone_size_bound),
                        tag.clone(),
                        m.to_string(),
                        depth.to_string(),
                        input.modes().iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                    ]
                })
                .collect::<Vec<_>>(),
        )),
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("ensemble".into(), json!(tag));
            obj.insert("M".into(), json!(m));
            obj.insert("depth".into(), json!(depth));
            obj.insert("input".into(), json!(input));
            for (name, rep) in &reports {
                obj.insert(name.to_string(), json!(rep));
            }
            Ok(json_bytes(&serde_json::Value::Object(obj)))
        }
    }
}

fn thresholds(r: &ExperimentConfig, format: Format) -> Result<Vec<u8>, Failure> {
    let (gamma, c, lambda, beta) = (
        r.gamma.unwrap_or(DEFAULT_GAMMA),
        r.c_const.unwrap_or(DEFAULT_C),
        r.lambda.unwrap_or(DEFAULT_LAMBDA),
        r.beta.unwrap_or(DEFAULT_BETA),
    );
    let d = r.dim.unwrap_or(1);
    let n = r.photons.unwrap_or(0);
    let f = fock::fock_depth_thresholds(n, gamma, c, d, lambda, beta)?;
    let g = gaussian::gaussian_depth_thresholds(r.pairs.unwrap_or(n / 2), gamma, c, d, lambda, beta)?;
    match format {
        Format::Json => Ok(json_bytes(&json!({
            "kappa0": f.kappa,
            "alpha0": f.alpha,
            "kappa1": g.kappa,
            "alpha1": g.alpha,
            "fock": f,
            "gaussian": g,
        }))),
        Format::Csv => Ok(csv_bytes(
            &[
                "scheme",
                "kappa",
                "alpha",
                "threshold_any_ensemble",
                "threshold_local_random",
                "epsilon",
                "photons",
                "gamma",
                "c_const",
                "lambda",
                "beta",
                "d",
            ],
            &[(&f, "fock"), (&g, "gaussian")]
                .iter()
                .map(|(rep, name)| {
                    vec![
                        name.to_string(),
                        rep.kappa.to_string(),
                        rep.alpha.to_string(),
                        rep.threshold_any_ensemble.to_string(),
                        rep.threshold_local_random.to_string(),
                        rep.epsilon.to_string(),
                        rep.photons.to_string(),
                        gamma.to_string(),
                        c.to_string(),
                        lambda.to_string(),
                        beta.to_string(),
                        d.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        )),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(vec![format!("cannot read {}: {e}", path.display())]))?;
    ExperimentConfig::from_toml(&text).map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))
}

fn run_invocation(kind: ExperimentKind, inv: Invocation) -> Result<(), Failure> {
    let started = Instant::now();
    let base = match &inv.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = base.merge(inv.params);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = inv.threads {
        if t == 0 {
            return Err(Failure::Invalid(vec!["threads must be at least 1".into()]));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Failure::Io(e.to_string()))?;
    let body = pool.install(|| execute(kind, &cfg))?;

    match &cfg.out {
        None => std::io::stdout().write_all(&body).map_err(|e| Failure::Io(e.to_string())),
        Some(out) => {
            write_atomically(out, &body)?;
            let manifest = json!({
                "experiment": kind.name(),
                "config": resolve(kind, &cfg),
                "version": env!("CARGO_PKG_VERSION"),
                "threads": pool.current_num_threads(),
                "wall_time_seconds": started.elapsed().as_secs_f64(),
            });
            write_atomically(&manifest_path(out), &json_bytes(&manifest))
        }
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, inv) = cli.command.split();
    match run_invocation(kind, inv) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn valid_configs_have_no_diagnostics() {
        let c = cfg("ensemble = \"nlhs\"\nmodes = 32\nrounds = 2\nphotons = 6\nsamples = 100\nseed = 7\n");
        assert!(validate(ExperimentKind::DensityFbs, &c).is_empty());
        let t = cfg("photons = 16\n");
        assert!(validate(ExperimentKind::Thresholds, &t).is_empty());
    }

    #[test]
    fn nlhs_needs_power_of_two() {
        let c = cfg("ensemble = \"nlhs\"\nmodes = 48\nphotons = 2\nseed = 1\n");
        let d = validate(ExperimentKind::DensityFbs, &c);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("power-of-two"));
    }

    #[test]
    fn beta_domain() {
        let c = cfg("photons = 16\nbeta = 1.5\n");
        let d = validate(ExperimentKind::Thresholds, &c);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("(0, 1)"));
    }

    #[test]
    fn pairs_exceeding_inputs() {
        let c = cfg("ensemble = \"nlhs\"\nmodes = 8\nscheme = \"gaussian\"\npairs = 3\nk-inputs = 2\n");
        let d = validate(ExperimentKind::PermittedCount, &c);
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].contains("exceed"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("mode = 3\n").is_err());
    }

    #[test]
    fn flags_override_config() {
        let base = cfg("modes = 16\nseed = 3\n");
        let flags = ExperimentConfig { seed: Some(9), ..Default::default() };
        let merged = base.merge(flags);
        assert_eq!((merged.modes, merged.seed), (Some(16), Some(9)));
    }

    #[test]
    fn local_sides_from_modes() {
        let c = cfg("ensemble = \"local-parallel\"\ndim = 2\nmodes = 16\ndepth = 3\n");
        let r = resolve(ExperimentKind::ArchInfo, &c);
        assert_eq!(r.sides, Some(vec![4, 4]));
        assert!(validate(ExperimentKind::ArchInfo, &c).is_empty());
        let bad = cfg("ensemble = \"local-parallel\"\ndim = 2\nmodes = 15\ndepth = 3\n");
        assert!(!validate(ExperimentKind::ArchInfo, &bad).is_empty());
    }

    #[test]
    fn thresholds_json_keys() {
        let c = cfg("photons = 16\nformat = \"json\"\n");
        let out = execute(ExperimentKind::Thresholds, &c).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        for key in ["kappa0", "alpha0", "kappa1", "alpha1"] {
            assert!(v[key].is_number(), "{key}");
        }
        assert!((v["kappa0"].as_f64().unwrap() - std::f64::consts::E / 2.0).abs() < 1e-15);
        assert!((v["kappa1"].as_f64().unwrap() - std::f64::consts::E / 8.0).abs() < 1e-15);
    }

    #[test]
    fn guard_maps_to_exit_three() {
        let c = cfg("ensemble = \"nlhs\"\nmodes = 64\nphotons = 8\n");
        let err = execute(ExperimentKind::PermittedCount, &c).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn density_has_one_row_per_bucket() {
        let c = cfg("ensemble = \"nlhs\"\nmodes = 32\nrounds = 2\nphotons = 6\nsamples = 1000\nseed = 7\n");
        let out = String::from_utf8(execute(ExperimentKind::DensityFbs, &c).unwrap()).unwrap();
        assert_eq!(out.lines().count(), 21);
        assert_eq!(out, String::from_utf8(execute(ExperimentKind::DensityFbs, &c).unwrap()).unwrap());
    }
}
