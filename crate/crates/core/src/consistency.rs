//! MSE-consistency of the sample mean under non-Gaussian noise.
//!
//! The presumed model is Gaussian, so the sample mean `x̄` is the MLE and its
//! presumed law is `Q̄ = N(μ, σ²_Q/N)`. The true law `P̄` is the exact law of
//! the sample mean of mixture noise. If `χ²(P̄‖Q̄)` grows slower than `N²`, the
//! bilateral upper bound `σ²_Q/N + √(2σ⁴_Q/N² · χ²)` still vanishes.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bilateral_bound, gaussian_sq_error_variance_bound, BoundLevel, CrbDiagonal};
use crate::divergence::{chi2_quadrature, serialize_f64, Diagnostics, DivergenceEstimate, Method};
use crate::error::{invalid, Error, Result};
use crate::models::{GaussianMixture1D, ScalarGaussian};
use crate::sim::{run_trials, summarize, ErrorKind, Law, SummaryStats, TrialSpec};

pub const DEFAULT_N_GRID: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

/// Values at or below this are treated as zero divergence by
/// [`growth_exponent`].
pub const ZERO_CHI2: f64 = 1e-12;

/// `χ²(P̄‖Q̄)` for sample size `n` by quadrature.
///
/// Returns `+∞` with a diagnostic note when some component of `P̄` is at
/// least twice as wide as `Q̄`, where the integral diverges.
pub fn chi2_bar(noise: &GaussianMixture1D, q_mean: f64, q_var: f64, n: usize) -> Result<DivergenceEstimate> {
    if !(q_var > 0.0 && q_var.is_finite()) {
        return Err(invalid(format!("presumed variance must be positive, got {q_var}")));
    }
    let p_bar = noise.sample_mean_law(n)?;
    let q_bar = ScalarGaussian::new(q_mean, q_var / n as f64)?;
    if 2.0 * q_bar.var() <= p_bar.max_component_var() {
        return Ok(DivergenceEstimate {
            value: f64::INFINITY,
            method: Method::Quadrature,
            diagnostics: Diagnostics {
                note: Some(format!(
                    "2·q_var/N = {} does not exceed the widest component variance {}",
                    2.0 * q_bar.var(),
                    p_bar.max_component_var()
                )),
                ..Diagnostics::default()
            },
        });
    }
    let (a1, b1) = p_bar.integration_domain();
    let (a2, b2) = q_bar.integration_domain();
    chi2_quadrature(&p_bar, &q_bar, (a1.min(a2), b1.max(b2)))
}

/// Least-squares slope of `ln χ²` against `ln N`.
///
/// An infinite value gives `+∞`. When every value is at most [`ZERO_CHI2`]
/// the divergence is identically zero and the slope is 0. Otherwise at least
/// four positive values are required; zero entries are skipped.
pub fn growth_exponent(n_grid: &[usize], chi2_values: &[f64]) -> Result<f64> {
    if n_grid.len() != chi2_values.len() {
        return Err(Error::LengthMismatch { left: n_grid.len(), right: chi2_values.len() });
    }
    if chi2_values.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(invalid("χ² values must be nonnegative"));
    }
    if chi2_values.iter().any(|v| v.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    if chi2_values.iter().all(|v| *v <= ZERO_CHI2) {
        return Ok(0.0);
    }
    let points: Vec<(f64, f64)> = n_grid
        .iter()
        .zip(chi2_values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(n, v)| ((*n as f64).ln(), v.ln()))
        .collect();
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("growth fit needs 4 positive values, got {}", points.len())));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("growth fit needs distinct sample sizes".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub n_grid: Vec<usize>,
    #[serde(serialize_with = "serialize_vec_f64")]
    pub chi2_bar: Vec<f64>,
    #[serde(serialize_with = "serialize_f64")]
    pub growth_exponent: f64,
    pub condition_met: bool,
    #[serde(serialize_with = "serialize_vec_f64")]
    pub ub_sequence: Vec<f64>,
    pub mse_q_sequence: Vec<f64>,
}

fn serialize_vec_f64<S: serde::Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct Elem(f64);
    impl Serialize for Elem {
        fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            serialize_f64(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Elem(*x))?;
    }
    seq.end()
}

pub fn consistency_report(
    noise: &GaussianMixture1D,
    q_mean: f64,
    q_var: f64,
    n_grid: &[usize],
) -> Result<ConsistencyReport> {
    if n_grid.len() < 4 {
        return Err(invalid(format!("sample-size grid needs at least 4 points, got {}", n_grid.len())));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("sample-size grid must be positive and strictly ascending"));
    }
    let chi2: Vec<f64> = n_grid
        .par_iter()
        .map(|&n| chi2_bar(noise, q_mean, q_var, n).map(|e| e.value))
        .collect::<Result<_>>()?;
    let exponent = growth_exponent(n_grid, &chi2)?;
    let mut ub_sequence = Vec::with_capacity(n_grid.len());
    let mut mse_q_sequence = Vec::with_capacity(n_grid.len());
    for (&n, &c) in n_grid.iter().zip(&chi2) {
        let var = gaussian_sq_error_variance_bound(&CrbDiagonal::new(vec![q_var], n)?);
        let bound = bilateral_bound(q_var / n as f64, var, c, BoundLevel::ErrorLevel)?;
        ub_sequence.push(bound.upper);
        mse_q_sequence.push(bound.mse_q);
    }
    Ok(ConsistencyReport {
        n_grid: n_grid.to_vec(),
        chi2_bar: chi2,
        growth_exponent: exponent,
        condition_met: exponent < 2.0,
        ub_sequence,
        mse_q_sequence,
    })
}

pub const SAMPLE_MEAN_STREAM: &str = "consistency/sample_mean";

/// Monte-Carlo MSE of the sample mean of `n` noise draws about `q_mean`.
pub fn sample_mean_mse(noise: &GaussianMixture1D, q_mean: f64, n: usize, trials: usize, seed: u64) -> Result<SummaryStats> {
    if n == 0 {
        return Err(invalid("sample size must be ≥ 1"));
    }
    let spec = TrialSpec { trials, seed, label: SAMPLE_MEAN_STREAM, law: Law::UnderP, kind: ErrorKind::SquaredError };
    let set = run_trials(
        &spec,
        |_| q_mean,
        |_, rng| (0..n).map(|_| noise.draw_with_component(rng).1).sum::<f64>() / n as f64,
        |x| Ok(*x),
    )?;
    summarize(&set)
}
