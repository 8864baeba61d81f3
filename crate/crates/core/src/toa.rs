//! Time-of-arrival estimation with a mismatched pulse width.
//!
//! Observations are `x_m = h_m(τ, T) + v_m`, `v ~ N(0, σ² I)`, with the
//! Gaussian pulse `h_m(τ, T) = exp(−((t_m − τ)/T)²)`. The true width is `T_P`;
//! the estimator is built for `T_Q`. Sample instants are centred on zero,
//! `t_m = (m − ⌊M/2⌋)·T_s` for `m = 1..M`, so the default window
//! `[−10, 10] μs` holds every pulse with `τ ∈ (−5, 5) μs`.
//!
//! SNR is `1/σ²` (unit pulse amplitude), quoted in dB. Times are in μs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{bilateral_bound, refine_lower_bound_monotone, BoundLevel, BoundReport};
use crate::divergence::{chi2_iso_gaussian_equal_cov, chi2_partition_estimate, Cells, DivergenceEstimate};
use crate::error::{invalid, Error, Result};
use crate::sim::{run_trials, summarize_values, ErrorKind, ErrorSampleSet, Law, SummaryStats, TrialSpec};

/// Experiment parameters. Every time quantity is in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToaConfig {
    pub samples: usize,
    pub ts_us: f64,
    pub tp_true_us: f64,
    pub tq_assumed_us: f64,
    pub tau_min_us: f64,
    pub tau_max_us: f64,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_snr: usize,
    pub grid_step_us: f64,
    pub seed: u64,
}

/// Ten points from the noise-only plateau through the threshold into the
/// locally Gaussian regime, for the fast profile (`T_s = 0.04 μs`).
pub const FAST_SNR_GRID_DB: [f64; 10] = [-23.0, -21.0, -19.0, -17.0, -15.0, -13.0, -11.0, -9.0, -7.0, -5.0];

/// The same regimes at `T_s = 0.01 μs`: four times the samples per pulse
/// shifts every SNR down by 10·log10(4) ≈ 6 dB.
pub const DEFAULT_SNR_GRID_DB: [f64; 10] = [-29.0, -27.0, -25.0, -23.0, -21.0, -19.0, -17.0, -15.0, -13.0, -11.0];

impl Default for ToaConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            ts_us: 0.01,
            tp_true_us: 2.0,
            tq_assumed_us: 2.2,
            tau_min_us: -5.0,
            tau_max_us: 5.0,
            snr_grid_db: DEFAULT_SNR_GRID_DB.to_vec(),
            trials_per_snr: 10_000,
            grid_step_us: 0.01,
            seed: 0x5eed,
        }
    }
}

impl ToaConfig {
    /// Reduced profile: 500 samples spanning the same 20 μs window, 2000
    /// trials per SNR point.
    pub fn fast() -> Self {
        Self {
            samples: 500,
            ts_us: 0.04,
            grid_step_us: 0.04,
            trials_per_snr: 2000,
            snr_grid_db: FAST_SNR_GRID_DB.to_vec(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(invalid(format!("need at least 2 samples, got {}", self.samples)));
        }
        for (name, v) in [
            ("ts_us", self.ts_us),
            ("tp_true_us", self.tp_true_us),
            ("tq_assumed_us", self.tq_assumed_us),
            ("grid_step_us", self.grid_step_us),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tau_min_us.is_finite() && self.tau_max_us.is_finite() && self.tau_min_us < self.tau_max_us) {
            return Err(invalid(format!("empty tau range [{}, {}]", self.tau_min_us, self.tau_max_us)));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("SNR grid must be finite"));
        }
        if self.snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("SNR grid must be strictly ascending"));
        }
        Ok(())
    }

    pub fn tau_mid(&self) -> f64 {
        0.5 * (self.tau_min_us + self.tau_max_us)
    }

    pub fn sample_time(&self, index: usize) -> f64 {
        sample_time(index, self.samples, self.ts_us)
    }
}

/// Noise variance for an SNR in dB.
pub fn sigma2_from_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Instant of the zero-based sample `index` in a window of `samples`.
pub fn sample_time(index: usize, samples: usize, ts: f64) -> f64 {
    (index as f64 + 1.0 - (samples / 2) as f64) * ts
}

/// Samples of the `tau`-shifted Gaussian pulse of width `tp`.
pub fn pulse(tau: f64, tp: f64, samples: usize, ts: f64) -> Vec<f64> {
    (0..samples)
        .map(|i| {
            let u = (sample_time(i, samples, ts) - tau) / tp;
            (-u * u).exp()
        })
        .collect()
}

/// First and second derivatives of [`pulse`] with respect to `tau`.
pub fn pulse_derivs(tau: f64, tp: f64, samples: usize, ts: f64) -> (Vec<f64>, Vec<f64>) {
    let tp2 = tp * tp;
    (0..samples)
        .map(|i| {
            let d = sample_time(i, samples, ts) - tau;
            let h = (-(d * d) / tp2).exp();
            (2.0 * d / tp2 * h, (4.0 * d * d / (tp2 * tp2) - 2.0 / tp2) * h)
        })
        .unzip()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Uniform search grid `lo, lo + step, …` up to `hi` (inclusive within rounding).
pub fn tau_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

/// Cross-correlation estimator built for an assumed pulse width.
///
/// Minimizes `‖x − h(τ′, T_Q)‖²` over the grid, i.e. maximizes
/// `xᵀh(τ′) − ½‖h(τ′)‖²`, then refines with one parabola through the best
/// grid point and its neighbours.
#[derive(Debug, Clone)]
pub struct Cce {
    grid: Vec<f64>,
    samples: usize,
    templates: Vec<f64>,
    half_energy: Vec<f64>,
}

impl Cce {
    pub fn new(tq: f64, grid: &[f64], samples: usize, ts: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(invalid("CCE search grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("CCE search grid must be ascending"));
        }
        let mut templates = Vec::with_capacity(grid.len() * samples);
        let mut half_energy = Vec::with_capacity(grid.len());
        for &tau in grid {
            let h = pulse(tau, tq, samples, ts);
            half_energy.push(0.5 * dot(&h, &h));
            templates.extend(h);
        }
        Ok(Self { grid: grid.to_vec(), samples, templates, half_energy })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn score(&self, k: usize, x: &[f64]) -> f64 {
        let row = &self.templates[k * self.samples..(k + 1) * self.samples];
        dot(row, x) - self.half_energy[k]
    }

    pub fn estimate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.samples {
            return Err(Error::LengthMismatch { left: x.len(), right: self.samples });
        }
        let scores: Vec<f64> = (0..self.grid.len()).map(|k| self.score(k, x)).collect();
        let mut best = 0;
        for (k, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = k;
            }
        }
        if best == 0 || best + 1 == scores.len() {
            return Ok(self.grid[best]);
        }
        let (l, c, r) = (scores[best - 1], scores[best], scores[best + 1]);
        let curvature = l - 2.0 * c + r;
        if !(curvature < 0.0) {
            return Ok(self.grid[best]);
        }
        let offset = (0.5 * (l - r) / curvature).clamp(-0.5, 0.5);
        let step = if offset >= 0.0 {
            self.grid[best + 1] - self.grid[best]
        } else {
            self.grid[best] - self.grid[best - 1]
        };
        Ok(self.grid[best] + offset * step)
    }
}

/// One-shot CCE estimate; builds the templates on every call.
pub fn cce_estimate(x: &[f64], tq: f64, grid: &[f64], samples: usize, ts: f64) -> Result<f64> {
    Cce::new(tq, grid, samples, ts)?.estimate(x)
}

/// Pseudo-true delay: the `τ′` minimizing `‖h(τ, T_P) − h(τ′, T_Q)‖²`.
///
/// Grid search over `τ ± 2·max(T_P, T_Q)` at step `T_s`, then Newton steps
/// on the stationarity condition `rᵀḣ(τ′) = 0`.
pub fn pseudo_true_tau(tau: f64, config: &ToaConfig) -> f64 {
    let (m, ts, tp, tq) = (config.samples, config.ts_us, config.tp_true_us, config.tq_assumed_us);
    let target = pulse(tau, tp, m, ts);
    let cost = |t: f64| {
        let h = pulse(t, tq, m, ts);
        target.iter().zip(&h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    };
    let reach = 2.0 * tp.max(tq);
    let coarse = tau_grid(tau - reach, tau + reach, ts);
    let mut best = coarse[0];
    let mut best_cost = cost(best);
    for &t in &coarse[1..] {
        let c = cost(t);
        if c < best_cost {
            best = t;
            best_cost = c;
        }
    }
    let mut t = best;
    for _ in 0..50 {
        let h = pulse(t, tq, m, ts);
        let (d1, d2) = pulse_derivs(t, tq, m, ts);
        let r: Vec<f64> = target.iter().zip(&h).map(|(a, b)| a - b).collect();
        let grad = dot(&r, &d1);
        let curv = dot(&d1, &d1) - dot(&r, &d2);
        if !(curv > 0.0) {
            break;
        }
        let step = (grad / curv).clamp(-ts, ts);
        t += step;
        if step.abs() <= 1e-14 * (1.0 + t.abs()) {
            break;
        }
    }
    t
}

/// Pieces of the misspecified CRB at one delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McrbTerms {
    pub tau0: f64,
    /// `(1/σ²)(rᵀḧ − ḣᵀḣ)` at the pseudo-true point.
    pub a: f64,
    /// `(1/σ²) ḣᵀḣ`
    pub b: f64,
    /// `rᵀḣ` at the pseudo-true point; zero up to rounding.
    pub stationarity: f64,
    /// `‖r‖·‖ḣ‖`, the scale for `stationarity`.
    pub stationarity_scale: f64,
}

impl McrbTerms {
    pub fn variance(&self) -> f64 {
        self.b / (self.a * self.a)
    }

    pub fn mse(&self, tau: f64) -> f64 {
        self.variance() + (self.tau0 - tau) * (self.tau0 - tau)
    }
}

pub fn mcrb_terms(tau: f64, sigma2: f64, config: &ToaConfig) -> Result<McrbTerms> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
    }
    let (m, ts, tp, tq) = (config.samples, config.ts_us, config.tp_true_us, config.tq_assumed_us);
    let tau0 = pseudo_true_tau(tau, config);
    let hp = pulse(tau, tp, m, ts);
    let hq = pulse(tau0, tq, m, ts);
    let r: Vec<f64> = hp.iter().zip(&hq).map(|(a, b)| a - b).collect();
    let (d1, d2) = pulse_derivs(tau0, tq, m, ts);
    let energy = dot(&d1, &d1);
    let a = (dot(&r, &d2) - energy) / sigma2;
    let b = energy / sigma2;
    if a.abs() < 1e-12 * b || b == 0.0 {
        return Err(Error::DegenerateCurvature);
    }
    Ok(McrbTerms {
        tau0,
        a,
        b,
        stationarity: dot(&r, &d1),
        stationarity_scale: dot(&r, &r).sqrt() * energy.sqrt(),
    })
}

/// MSE-level misspecified CRB: sandwich variance `B/A²` plus the squared
/// pseudo-true bias.
pub fn mcrb(tau: f64, sigma2: f64, config: &ToaConfig) -> Result<f64> {
    Ok(mcrb_terms(tau, sigma2, config)?.mse(tau))
}

/// χ² between the true and presumed data laws at delay `tau`.
pub fn chi2_toa_data_level(tau: f64, config: &ToaConfig, sigma2: f64) -> Result<DivergenceEstimate> {
    let hp = pulse(tau, config.tp_true_us, config.samples, config.ts_us);
    let hq = pulse(tau, config.tq_assumed_us, config.samples, config.ts_us);
    chi2_iso_gaussian_equal_cov(&hp, &hq, sigma2)
}

pub const TOA_STREAM_P: &str = "toa/P";
pub const TOA_STREAM_Q: &str = "toa/Q";

/// Squared-error samples under both data laws at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaPoint {
    pub snr_db: f64,
    pub sigma2: f64,
    pub under_p: ErrorSampleSet,
    pub under_q: ErrorSampleSet,
}

/// Runs the CCE under `P_data` (true width) and `Q_data` (assumed width).
///
/// The delay and the unit noise of trial `t` depend only on `(seed, law, t)`,
/// so the same draws are reused at every SNR.
pub fn run_toa_point(config: &ToaConfig, cce: &Cce, snr_db: f64, seed: u64) -> Result<ToaPoint> {
    let sigma2 = sigma2_from_db(snr_db);
    let sigma = sigma2.sqrt();
    let (lo, hi) = (config.tau_min_us, config.tau_max_us);
    let run = |label: &str, width: f64, law: Law| {
        let spec = TrialSpec { trials: config.trials_per_snr, seed, label, law, kind: ErrorKind::SquaredError };
        run_trials(
            &spec,
            |rng| lo + (hi - lo) * rng.random::<f64>(),
            |tau, rng| {
                (0..config.samples)
                    .map(|i| {
                        let u = (config.sample_time(i) - tau) / width;
                        let z: f64 = StandardNormal.sample(rng);
                        (-u * u).exp() + sigma * z
                    })
                    .collect::<Vec<f64>>()
            },
            |x| cce.estimate(x).map_err(|e| e.to_string()),
        )
    };
    Ok(ToaPoint {
        snr_db,
        sigma2,
        under_p: run(TOA_STREAM_P, config.tp_true_us, Law::UnderP)?,
        under_q: run(TOA_STREAM_Q, config.tq_assumed_us, Law::UnderQ)?,
    })
}

/// One row of the SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaRecord {
    pub snr_db: f64,
    pub sigma2: f64,
    pub under_p: SummaryStats,
    pub under_q: SummaryStats,
    pub chi2_hat: DivergenceEstimate,
    /// Error-level bound with `refined_lower` and `mcrb` filled in.
    pub bound: BoundReport,
}

impl ToaRecord {
    pub fn mse_p(&self) -> f64 {
        self.under_p.mean
    }

    pub fn mse_q(&self) -> f64 {
        self.under_q.mean
    }

    pub fn rmse_p(&self) -> f64 {
        self.under_p.mean.sqrt()
    }

    pub fn rmse_q(&self) -> f64 {
        self.under_q.mean.sqrt()
    }

    pub fn refined_lower(&self) -> f64 {
        self.bound.refined_lower.unwrap_or(self.bound.lower)
    }

    pub fn mcrb(&self) -> f64 {
        self.bound.mcrb.unwrap_or(f64::NAN)
    }
}

/// Builds the per-SNR bound from the two sample sets.
pub fn bound_from_point(point: &ToaPoint) -> Result<(SummaryStats, SummaryStats, DivergenceEstimate, BoundReport)> {
    let p = summarize_values(&point.under_p.values)?;
    let q = summarize_values(&point.under_q.values)?;
    let chi2 = chi2_partition_estimate(&point.under_p.values, &point.under_q.values, Cells::Auto)?;
    let bound = bilateral_bound(q.mean, q.variance, chi2.value, BoundLevel::ErrorLevel)?;
    Ok((p, q, chi2, bound))
}

/// Full SNR sweep: bounds per SNR, the monotone refinement of the lower
/// bound across the grid, and the MCRB at the midpoint of the delay range.
pub fn run_toa_experiment(config: &ToaConfig) -> Result<Vec<ToaRecord>> {
    config.validate()?;
    let grid = tau_grid(config.tau_min_us, config.tau_max_us, config.grid_step_us);
    let cce = Cce::new(config.tq_assumed_us, &grid, config.samples, config.ts_us)?;
    let tau_mid = config.tau_mid();
    let mut records = Vec::with_capacity(config.snr_grid_db.len());
    for &snr_db in &config.snr_grid_db {
        let point = run_toa_point(config, &cce, snr_db, config.seed)?;
        let (under_p, under_q, chi2_hat, mut bound) = bound_from_point(&point)?;
        bound.mcrb = Some(mcrb(tau_mid, point.sigma2, config)?);
        records.push(ToaRecord { snr_db, sigma2: point.sigma2, under_p, under_q, chi2_hat, bound });
    }
    let lower: Vec<f64> = records.iter().map(|r| r.bound.lower).collect();
    let refined = refine_lower_bound_monotone(&config.snr_grid_db, &lower)?;
    for (rec, lb) in records.iter_mut().zip(refined) {
        rec.bound.refined_lower = Some(lb);
    }
    Ok(records)
}
