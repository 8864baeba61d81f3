//! Bayesian SIMO receiver with an angular mismatch.
//!
//! `x = a(φ) s + v` with `s ~ N(0,1)`, `v ~ N(0, I/snr)` and a real unit-norm
//! steering vector. The receiver applies the MMSE weight for the assumed
//! angle, `ŝ = snr/(1+snr) · a(φ̃)ᵀ x`. Both error laws are zero-mean
//! Gaussians and every closed form depends on the angles only through
//! `ρ = a(φ)ᵀ a(φ̃)`.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{bilateral_bound, BoundLevel};
use crate::divergence::chi2_scalar_gaussian;
use crate::error::{invalid, Error, Result};
use crate::models::ScalarGaussian;
use crate::sim::{run_trials, summarize, ErrorKind, ErrorSampleSet, Law, SummaryStats, TrialSpec, MIN_TRIALS};

pub const DEFAULT_SENSORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaConfig {
    sensors: usize,
    phi_true_deg: f64,
    phi_assumed_deg: f64,
    snr: f64,
}

fn check_angle(name: &str, deg: f64) -> Result<()> {
    if !(0.0..180.0).contains(&deg) {
        return Err(invalid(format!("{name} must lie in [0°, 180°), got {deg}")));
    }
    Ok(())
}

impl DoaConfig {
    /// `snr` is linear.
    pub fn new(sensors: usize, phi_true_deg: f64, phi_assumed_deg: f64, snr: f64) -> Result<Self> {
        if sensors == 0 {
            return Err(invalid("need at least one sensor"));
        }
        check_angle("true DOA", phi_true_deg)?;
        check_angle("assumed DOA", phi_assumed_deg)?;
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(invalid(format!("snr must be positive, got {snr}")));
        }
        Ok(Self { sensors, phi_true_deg, phi_assumed_deg, snr })
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn phi_true_deg(&self) -> f64 {
        self.phi_true_deg
    }

    pub fn phi_assumed_deg(&self) -> f64 {
        self.phi_assumed_deg
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn with_assumed(&self, phi_assumed_deg: f64) -> Result<Self> {
        Self::new(self.sensors, self.phi_true_deg, phi_assumed_deg, self.snr)
    }

    /// `a(φ)ᵀ a(φ̃)`
    pub fn rho(&self) -> f64 {
        if self.phi_true_deg == self.phi_assumed_deg {
            return 1.0;
        }
        let a = steering(self.phi_true_deg, self.sensors);
        let b = steering(self.phi_assumed_deg, self.sensors);
        a.iter().zip(&b).map(|(x, y)| x * y).sum()
    }
}

/// Unit-norm real steering vector `ã/‖ã‖` with `ã_m = cos(π (m−1) cos φ)`.
pub fn steering(phi_deg: f64, sensors: usize) -> Vec<f64> {
    let u = (phi_deg * PI / 180.0).cos();
    let raw: Vec<f64> = (0..sensors).map(|m| (PI * m as f64 * u).cos()).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm > 0.0, "first element is always 1");
    raw.into_iter().map(|x| x / norm).collect()
}

/// Closed-form quantities of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaClosedForms {
    pub rho: f64,
    /// `1/(1+snr)`
    pub mse_q: f64,
    /// `MSE_Q / MSE_P ∈ (0, 1]`
    pub gamma2: f64,
    pub mse_p: f64,
    /// Error-level χ²(P‖Q); `+∞` when `γ² ≤ 1/2`.
    pub chi2: f64,
    /// `(1 + c√2)/(1+snr)` with `c² = χ²`.
    pub upper: f64,
}

impl DoaClosedForms {
    /// Inflation factor `1/γ² = MSE_P / MSE_Q`.
    pub fn inflation(&self) -> f64 {
        1.0 / self.gamma2
    }
}

/// Inflation of the error variance caused by a steering correlation `rho`.
///
/// The error is `ε = (gρ − 1)s + g a(φ̃)ᵀv` with `g = snr/(1+snr)`, so
/// `MSE_P = [(1 + snr(1−ρ))² + snr]/(1+snr)²` and dividing by `MSE_Q = 1/(1+snr)`
/// gives `1 + snr(1−ρ)(2 + snr(1−ρ))/(1+snr) ≥ 1`.
pub fn inflation_factor(rho: f64, snr: f64) -> f64 {
    let d = snr * (1.0 - rho);
    1.0 + d * (2.0 + d) / (1.0 + snr)
}

pub fn closed_forms_from_rho(rho: f64, snr: f64) -> Result<DoaClosedForms> {
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho) {
        return Err(invalid(format!("steering correlation must lie in [-1, 1], got {rho}")));
    }
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(invalid(format!("snr must be positive, got {snr}")));
    }
    let rho = rho.clamp(-1.0, 1.0);
    let mse_q = 1.0 / (1.0 + snr);
    let inflation = inflation_factor(rho, snr);
    let mse_p = inflation * mse_q;
    let gamma2 = 1.0 / inflation;
    let p = ScalarGaussian::new(0.0, mse_p)?;
    let q = ScalarGaussian::new(0.0, mse_q)?;
    let chi2 = chi2_scalar_gaussian(&p, &q).value;
    // Var_Q(ε²) = 2·MSE_Q² for a zero-mean Gaussian error
    let bound = bilateral_bound(mse_q, 2.0 * mse_q * mse_q, chi2, BoundLevel::ErrorLevel)?;
    Ok(DoaClosedForms { rho, mse_q, gamma2, mse_p, chi2, upper: bound.upper })
}

pub fn doa_closed_forms(config: &DoaConfig) -> Result<DoaClosedForms> {
    closed_forms_from_rho(config.rho(), config.snr)
}

/// Monte-Carlo run of the mismatched receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaSimulation {
    pub errors: ErrorSampleSet,
    pub summary: SummaryStats,
}

/// Stream label shared by every grid point, so a sweep over `φ̃` reuses the
/// same `(s, v)` draws.
pub const DOA_STREAM: &str = "doa/trial";

/// Simulates `trials` receptions and records squared errors `(ŝ − s)²`.
pub fn simulate_doa(config: &DoaConfig, trials: usize, seed: u64) -> Result<DoaSimulation> {
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials(trials));
    }
    let a_true = steering(config.phi_true_deg, config.sensors);
    let a_assumed = steering(config.phi_assumed_deg, config.sensors);
    let noise_sd = (1.0 / config.snr).sqrt();
    let gain = config.snr / (1.0 + config.snr);
    let law = if config.phi_true_deg == config.phi_assumed_deg { Law::UnderQ } else { Law::UnderP };
    let spec = TrialSpec { trials, seed, label: DOA_STREAM, law, kind: ErrorKind::SquaredError };
    let errors = run_trials(
        &spec,
        |rng| StandardNormal.sample(rng),
        |s, rng| {
            a_true
                .iter()
                .map(|a| {
                    let z: f64 = StandardNormal.sample(rng);
                    a * s + noise_sd * z
                })
                .collect::<Vec<f64>>()
        },
        |x| Ok(gain * a_assumed.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>()),
    )?;
    let summary = summarize(&errors)?;
    Ok(DoaSimulation { errors, summary })
}
