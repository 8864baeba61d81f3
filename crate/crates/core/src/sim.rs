//! Seeded Monte-Carlo trial runner and summary statistics.
//!
//! Every trial owns a generator derived from `(base seed, stream label,
//! trial index)`, so the output never depends on how rayon schedules the
//! trials. Grid sweeps reuse the same label on every grid point, which makes
//! neighbouring points share their random draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

/// Minimum number of trials accepted by [`run_trials`].
pub const MIN_TRIALS: usize = 100;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed of the stream used by trial `index` of the experiment `label`.
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ fnv1a(label)) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn stream(base: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, label, index))
}

/// Which data law generated a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    UnderP,
    UnderQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    SquaredError,
    RawError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub message: String,
}

/// Per-trial estimation errors, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSampleSet {
    pub values: Vec<f64>,
    pub law: Law,
    pub seed: u64,
    pub kind: ErrorKind,
    pub failures: Vec<TrialFailure>,
}

impl ErrorSampleSet {
    pub fn new(values: Vec<f64>, law: Law, seed: u64, kind: ErrorKind) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("error sample set is empty".into()));
        }
        if kind == ErrorKind::SquaredError && values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("squared errors must be nonnegative".into()));
        }
        Ok(Self { values, law, seed, kind, failures: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Squared errors, whatever kind was recorded.
    pub fn squared(&self) -> Vec<f64> {
        match self.kind {
            ErrorKind::SquaredError => self.values.clone(),
            ErrorKind::RawError => self.values.iter().map(|e| e * e).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
    pub ci99_half_width: f64,
    pub n: usize,
}

impl SummaryStats {
    pub fn ci99(&self) -> (f64, f64) {
        (self.mean - self.ci99_half_width, self.mean + self.ci99_half_width)
    }

    pub fn ci_contains(&self, x: f64) -> bool {
        (self.mean - x).abs() <= self.ci99_half_width
    }
}

/// Mean and unbiased variance of `values` (Welford's update).
pub fn summarize_values(values: &[f64]) -> Result<SummaryStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("summary needs n ≥ 2, got {n}")));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let variance = (m2 / (n - 1) as f64).max(0.0);
    Ok(SummaryStats { mean, variance, ci99_half_width: Z99 * (variance / n as f64).sqrt(), n })
}

pub fn summarize(set: &ErrorSampleSet) -> Result<SummaryStats> {
    summarize_values(&set.values)
}

/// Configuration of one batch of trials.
#[derive(Debug, Clone)]
pub struct TrialSpec<'a> {
    pub trials: usize,
    pub seed: u64,
    /// Stream label; trials with the same `(seed, label, index)` see the same draws.
    pub label: &'a str,
    pub law: Law,
    pub kind: ErrorKind,
}

/// Runs `spec.trials` independent trials.
///
/// Per trial `t`: a generator is derived from `(seed, label, t)`, the truth is
/// drawn, then the data given the truth, then the estimator is applied. The
/// recorded value is `estimate − truth` (or its square). Estimator failures
/// are kept as [`TrialFailure`]s; more than 0.1% of failed trials aborts.
pub fn run_trials<D, T, G, E>(spec: &TrialSpec<'_>, truth: T, data: G, estimator: E) -> Result<ErrorSampleSet>
where
    T: Fn(&mut ChaCha8Rng) -> f64 + Sync,
    G: Fn(f64, &mut ChaCha8Rng) -> D + Sync,
    E: Fn(&D) -> std::result::Result<f64, String> + Sync,
{
    if spec.trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials(spec.trials));
    }
    let outcomes: Vec<std::result::Result<f64, String>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(spec.seed, spec.label, t as u64);
            let theta = truth(&mut rng);
            let x = data(theta, &mut rng);
            estimator(&x).map(|est| est - theta)
        })
        .collect();

    let mut values = Vec::with_capacity(spec.trials);
    let mut failures = Vec::new();
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(err) if err.is_finite() => values.push(match spec.kind {
                ErrorKind::SquaredError => err * err,
                ErrorKind::RawError => err,
            }),
            Ok(err) => failures.push(TrialFailure { trial, message: format!("non-finite error {err}") }),
            Err(message) => failures.push(TrialFailure { trial, message }),
        }
    }
    // abort above 0.1% failed trials
    if failures.len() * 1000 > spec.trials {
        return Err(Error::TooManyFailures { failed: failures.len(), trials: spec.trials });
    }
    let mut set = ErrorSampleSet::new(values, spec.law, spec.seed, spec.kind)?;
    set.failures = failures;
    Ok(set)
}
