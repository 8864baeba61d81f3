//! Bilateral MSE bounds under model mismatch.
//!
//! With `ε` the estimation error, `Q` the law of `‖ε‖²` under the presumed
//! model and `P` its law under the true one,
//!
//! ```text
//! MSE_Q − Δ ≤ MSE_P ≤ MSE_Q + Δ,    Δ = √(Var_Q(‖ε‖²) · χ²(P‖Q)).
//! ```
//!
//! The same inequality holds with χ² taken between the data laws (it can only
//! grow), which is the `DataLevel` variant.

use serde::Serialize;

use crate::divergence::serialize_f64;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundLevel {
    ErrorLevel,
    DataLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub mse_q: f64,
    pub var_q_sq_err: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub chi2: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub delta: f64,
    /// Raw lower bound; may be negative.
    #[serde(serialize_with = "serialize_f64")]
    pub lower: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub upper: f64,
    pub level: BoundLevel,
    pub refined_lower: Option<f64>,
    pub mcrb: Option<f64>,
}

impl BoundReport {
    /// Lower bound clamped at zero (MSE is nonnegative).
    pub fn lower_clamped(&self) -> f64 {
        self.lower.max(0.0)
    }

    /// False when the divergence is infinite and the bounds are vacuous.
    pub fn is_informative(&self) -> bool {
        self.delta.is_finite()
    }

    pub fn brackets(&self, mse: f64) -> bool {
        self.lower <= mse && mse <= self.upper
    }
}

/// `Δ = √(var · χ²)`, with `0 · ∞` taken as 0.
pub fn delta_term(var_q_sq_err: f64, chi2: f64) -> Result<f64> {
    if var_q_sq_err.is_nan() || chi2.is_nan() || var_q_sq_err < 0.0 || chi2 < 0.0 {
        return Err(invalid(format!("Δ needs nonnegative inputs, got ({var_q_sq_err}, {chi2})")));
    }
    if var_q_sq_err == 0.0 || chi2 == 0.0 {
        return Ok(0.0);
    }
    Ok((var_q_sq_err * chi2).sqrt())
}

pub fn bilateral_bound(mse_q: f64, var_q_sq_err: f64, chi2: f64, level: BoundLevel) -> Result<BoundReport> {
    if !(mse_q >= 0.0 && mse_q.is_finite()) {
        return Err(invalid(format!("MSE_Q must be finite and nonnegative, got {mse_q}")));
    }
    let delta = delta_term(var_q_sq_err, chi2)?;
    Ok(BoundReport {
        mse_q,
        var_q_sq_err,
        chi2,
        delta,
        lower: mse_q - delta,
        upper: mse_q + delta,
        level,
        refined_lower: None,
        mcrb: None,
    })
}

/// Suffix running maximum over an ascending SNR grid: the MSE cannot grow
/// with SNR, so any lower bound at a higher SNR also holds at a lower one.
pub fn refine_lower_bound_monotone(snr_grid: &[f64], lb_values: &[f64]) -> Result<Vec<f64>> {
    if snr_grid.len() != lb_values.len() {
        return Err(Error::LengthMismatch { left: snr_grid.len(), right: lb_values.len() });
    }
    if snr_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("SNR grid must be strictly ascending"));
    }
    let mut out = lb_values.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    Ok(out)
}

/// Per-parameter CRB diagonal `σ²_{CRB,k}` for a sample of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbDiagonal {
    sigma2: Vec<f64>,
    n: usize,
}

impl CrbDiagonal {
    pub fn new(sigma2: Vec<f64>, n: usize) -> Result<Self> {
        if sigma2.is_empty() {
            return Err(invalid("CRB diagonal needs at least one entry"));
        }
        if sigma2.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("CRB entries must be positive"));
        }
        if n == 0 {
            return Err(invalid("sample size must be ≥ 1"));
        }
        Ok(Self { sigma2, n })
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Upper bound `(2/N²)·‖Σ‖_F²` on `Var(‖ε‖²)` for an asymptotically
/// Gaussian error with the given CRB diagonal, where `Σ_kk = σ²_k` and
/// `Σ_kl = σ_k σ_l`. Exact for a single parameter: `2σ⁴/N²`.
pub fn gaussian_sq_error_variance_bound(crb: &CrbDiagonal) -> f64 {
    let sd: Vec<f64> = crb.sigma2.iter().map(|s| s.sqrt()).collect();
    let mut frob2 = 0.0;
    for (k, sk2) in crb.sigma2.iter().enumerate() {
        for (l, sl) in sd.iter().enumerate() {
            let entry = if k == l { *sk2 } else { sd[k] * sl };
            frob2 += entry * entry;
        }
    }
    let n = crb.n as f64;
    2.0 * frob2 / (n * n)
}
