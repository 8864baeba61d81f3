//! Chi-square divergence χ²(P‖Q) = E_Q[(dP/dQ)²] − 1.
//!
//! Closed forms for Gaussian pairs, a plug-in estimator on a data-dependent
//! partition, a quadrature oracle, and the variational ratio
//! `(E_P g − E_Q g)² / Var_Q g` that every test function `g` keeps below χ².

use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::models::{Density1D, ScalarGaussian};
use crate::quadrature::{integrate_real_line, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Partition,
    Quadrature,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub cell_count: Option<usize>,
    #[serde(serialize_with = "serialize_opt_f64")]
    pub quad_abs_err: Option<f64>,
    pub sample_sizes: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    /// Nonnegative, possibly `+∞`.
    #[serde(serialize_with = "serialize_f64")]
    pub value: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl DivergenceEstimate {
    pub fn closed_form(value: f64) -> Self {
        Self { value, method: Method::ClosedForm, diagnostics: Diagnostics::default() }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// JSON has no infinities: non-finite values are written as strings.
pub(crate) fn serialize_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

fn serialize_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_f64(x, s),
        None => s.serialize_none(),
    }
}

/// χ² between two scalar Gaussians; `+∞` unless `2·Q.var > P.var`.
pub fn chi2_scalar_gaussian(p: &ScalarGaussian, q: &ScalarGaussian) -> DivergenceEstimate {
    let denom = 2.0 * q.var() - p.var();
    if denom <= 0.0 {
        return DivergenceEstimate::closed_form(f64::INFINITY);
    }
    let dm = p.mu() - q.mu();
    // Q.var / √(P.var·denom) = (1 − u²)^(−1/2) with u = (Q.var − P.var)/Q.var;
    // exp_m1 keeps relative precision near P = Q, where the value is 0.
    let u = (q.var() - p.var()) / q.var();
    let value = (dm * dm / denom - 0.5 * (-u * u).ln_1p()).exp_m1();
    DivergenceEstimate::closed_form(value.max(0.0))
}

/// χ² between `N(mu_p, var·I)` and `N(mu_q, var·I)`: `exp(‖mu_p − mu_q‖²/var) − 1`.
pub fn chi2_iso_gaussian_equal_cov(mu_p: &[f64], mu_q: &[f64], var: f64) -> Result<DivergenceEstimate> {
    if mu_p.len() != mu_q.len() {
        return Err(Error::LengthMismatch { left: mu_p.len(), right: mu_q.len() });
    }
    if !(var > 0.0 && var.is_finite()) {
        return Err(invalid(format!("variance must be positive, got {var}")));
    }
    let sq: f64 = mu_p.iter().zip(mu_q).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(DivergenceEstimate::closed_form((sq / var).exp_m1()))
}

/// Number of partition cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cells {
    /// `max(10, ⌊n_q^{1/3}⌋)`
    Auto,
    Fixed(usize),
}

impl Cells {
    pub fn resolve(self, n_q: usize) -> usize {
        match self {
            Cells::Auto => 10usize.max((n_q as f64).cbrt().floor() as usize),
            Cells::Fixed(t) => t,
        }
    }
}

/// Upper cell boundaries `b_1 < … < b_{T−1}` splitting the sorted Q sample
/// into cells of (near-)equal Q mass. Cell `j` is `(b_j, b_{j+1}]` with the
/// outermost cells open to ±∞.
///
/// A boundary sits at the midpoint between two consecutive distinct order
/// statistics. When the target split point falls inside a run of tied values,
/// the whole run stays in the lower cell.
pub fn partition_boundaries(sorted_q: &[f64], cells: usize) -> Result<Vec<f64>> {
    let n = sorted_q.len();
    let degenerate = || {
        let mut distinct = usize::from(n > 0);
        distinct += sorted_q.windows(2).filter(|w| w[0] < w[1]).count();
        Error::DegeneratePartition { distinct, cells }
    };
    let mut bounds = Vec::with_capacity(cells.saturating_sub(1));
    let mut prev = 0usize;
    for j in 1..cells {
        let target = ((j * n) as f64 / cells as f64).round() as usize;
        let mut k = target.max(prev + 1);
        while k < n && sorted_q[k - 1] >= sorted_q[k] {
            k += 1;
        }
        if k >= n {
            return Err(degenerate());
        }
        let (lo, hi) = (sorted_q[k - 1], sorted_q[k]);
        let mut b = lo + 0.5 * (hi - lo);
        if b >= hi {
            b = lo;
        }
        bounds.push(b);
        prev = k;
    }
    Ok(bounds)
}

fn cell_counts(values: &[f64], bounds: &[f64]) -> Vec<usize> {
    let mut counts = vec![0usize; bounds.len() + 1];
    for &x in values {
        counts[bounds.partition_point(|&b| b < x)] += 1;
    }
    counts
}

/// Plug-in χ² estimate `Σ p̂ⱼ²/q̂ⱼ − 1` on cells holding equal shares of the
/// Q sample.
pub fn chi2_partition_estimate(p_samples: &[f64], q_samples: &[f64], cells: Cells) -> Result<DivergenceEstimate> {
    if p_samples.is_empty() || q_samples.is_empty() {
        return Err(Error::InsufficientData("partition estimate needs nonempty sample sets".into()));
    }
    if p_samples.iter().chain(q_samples).any(|x| !x.is_finite()) {
        return Err(invalid("partition estimate needs finite samples"));
    }
    let t = cells.resolve(q_samples.len());
    if t < 2 {
        return Err(invalid(format!("partition needs at least 2 cells, got {t}")));
    }
    let mut sorted_q = q_samples.to_vec();
    sorted_q.sort_by(f64::total_cmp);
    let bounds = partition_boundaries(&sorted_q, t)?;
    let cp = cell_counts(p_samples, &bounds);
    let cq = cell_counts(q_samples, &bounds);
    let (np, nq) = (p_samples.len() as f64, q_samples.len() as f64);
    let sum: f64 = cp
        .iter()
        .zip(&cq)
        .filter(|(p, _)| **p > 0)
        .map(|(&p, &q)| {
            debug_assert!(q > 0, "every cell holds at least one Q sample");
            let ph = p as f64 / np;
            ph * ph / (q as f64 / nq)
        })
        .sum();
    Ok(DivergenceEstimate {
        value: (sum - 1.0).max(0.0),
        method: Method::Partition,
        diagnostics: Diagnostics {
            cell_count: Some(t),
            sample_sizes: Some((p_samples.len(), q_samples.len())),
            ..Diagnostics::default()
        },
    })
}

/// χ² by adaptive quadrature of `p²/q − 1` over the real line; `domain` is
/// the core region where the densities carry their mass.
///
/// The integrand is formed in log space, so far tails where both densities
/// underflow contribute exactly zero. A tail where `p²/q` does not decay is
/// reported as [`Error::QuadratureFailed`].
pub fn chi2_quadrature<P: Density1D, Q: Density1D>(p: &P, q: &Q, domain: (f64, f64)) -> Result<DivergenceEstimate> {
    chi2_quadrature_with(p, q, domain, &QuadOptions::default())
}

pub fn chi2_quadrature_with<P: Density1D, Q: Density1D>(
    p: &P,
    q: &Q,
    domain: (f64, f64),
    opts: &QuadOptions,
) -> Result<DivergenceEstimate> {
    let integrand = |x: f64| {
        let lp = p.ln_density(x);
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        (2.0 * lp - q.ln_density(x)).exp()
    };
    let r = integrate_real_line(integrand, domain.0, domain.1, opts)?;
    Ok(DivergenceEstimate {
        value: (r.value - 1.0).max(0.0),
        method: Method::Quadrature,
        diagnostics: Diagnostics { quad_abs_err: Some(r.abs_err), ..Diagnostics::default() },
    })
}

/// Core integration region covering both Gaussians (±10 sd around each mean).
pub fn gaussian_pair_domain(p: &ScalarGaussian, q: &ScalarGaussian) -> (f64, f64) {
    let (a1, b1) = p.integration_domain();
    let (a2, b2) = q.integration_domain();
    (a1.min(a2), b1.max(b2))
}

/// `(E_P g − E_Q g)² / Var_Q g`, a lower bound on χ²(P‖Q) for every `g`.
pub fn variational_ratio(mean_g_p: f64, mean_g_q: f64, var_g_q: f64) -> Result<f64> {
    if !(var_g_q > 0.0) {
        return Err(invalid(format!("Var_Q(g) must be positive, got {var_g_q}")));
    }
    let d = mean_g_p - mean_g_q;
    Ok(d * d / var_g_q)
}
