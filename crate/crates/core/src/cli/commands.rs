use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::{ConsistencyRunConfig, DivergenceRunConfig, DoaRunConfig};
use super::CliError;
use crate::consistency::{consistency_report, ConsistencyReport};
use crate::divergence::{
    chi2_partition_estimate, chi2_quadrature, chi2_scalar_gaussian, gaussian_pair_domain, Cells, DivergenceEstimate,
};
use crate::doa::{doa_closed_forms, simulate_doa, DoaConfig};
use crate::models::ScalarGaussian;
use crate::toa::{run_toa_experiment, ToaConfig, ToaRecord};

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn signed_sqrt(v: f64) -> f64 {
    v.signum() * v.abs().sqrt()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaRow {
    pub phi_assumed_deg: f64,
    pub rho: f64,
    pub mse_q: f64,
    pub mse_p_closed: f64,
    pub mse_p_empirical: f64,
    pub ci99: f64,
    pub chi2: f64,
    pub ub: f64,
}

pub const DOA_HEADER: [&str; 8] =
    ["phi_assumed_deg", "rho", "mse_q", "mse_p_closed", "mse_p_empirical", "ci99", "chi2", "ub"];

/// One row per assumed angle. Every angle reuses the same trial draws.
pub fn run_doa(cfg: &DoaRunConfig) -> Result<Vec<DoaRow>, CliError> {
    cfg.validate()?;
    let snr = cfg.snr_linear();
    cfg.phi_grid
        .values()
        .into_iter()
        .map(|phi| {
            let c = DoaConfig::new(cfg.sensors, cfg.phi_true_deg, phi, snr)?;
            let f = doa_closed_forms(&c)?;
            let sim = simulate_doa(&c, cfg.trials, cfg.seed)?;
            Ok(DoaRow {
                phi_assumed_deg: phi,
                rho: f.rho,
                mse_q: f.mse_q,
                mse_p_closed: f.mse_p,
                mse_p_empirical: sim.summary.mean,
                ci99: sim.summary.ci99_half_width,
                chi2: f.chi2,
                ub: f.upper,
            })
        })
        .collect()
}

pub fn doa_csv(rows: &[DoaRow]) -> Result<String, CliError> {
    csv_string(
        &DOA_HEADER,
        rows.iter().map(|r| {
            [r.phi_assumed_deg, r.rho, r.mse_q, r.mse_p_closed, r.mse_p_empirical, r.ci99, r.chi2, r.ub]
                .map(fmt_f64)
                .to_vec()
        }),
    )
}

pub fn cmd_doa(cfg: &DoaRunConfig) -> Result<String, CliError> {
    doa_csv(&run_doa(cfg)?)
}

pub const TOA_HEADER: [&str; 9] =
    ["snr_db", "rmse_p", "rmse_q", "chi2_hat", "lb_raw", "lb_clamped", "lb_refined", "ub", "mcrb_rmse"];

/// Bound columns are on the root-MSE scale (μs); a negative raw lower bound
/// keeps its sign.
pub fn toa_csv(records: &[ToaRecord]) -> Result<String, CliError> {
    csv_string(
        &TOA_HEADER,
        records.iter().map(|r| {
            [
                r.snr_db,
                r.rmse_p(),
                r.rmse_q(),
                r.chi2_hat.value,
                signed_sqrt(r.bound.lower),
                r.bound.lower_clamped().sqrt(),
                signed_sqrt(r.refined_lower()),
                r.bound.upper.sqrt(),
                r.mcrb().sqrt(),
            ]
            .map(fmt_f64)
            .to_vec()
        }),
    )
}

pub fn cmd_toa(cfg: &ToaConfig) -> Result<String, CliError> {
    toa_csv(&run_toa_experiment(cfg)?)
}

pub const CONSISTENCY_HEADER: [&str; 4] = ["N", "chi2_bar", "mse_q", "ub"];

pub fn run_consistency(cfg: &ConsistencyRunConfig) -> Result<ConsistencyReport, CliError> {
    let noise = cfg.noise.build()?;
    Ok(consistency_report(&noise, cfg.q_mean, cfg.q_var, &cfg.n_grid)?)
}

pub fn consistency_csv(report: &ConsistencyReport) -> Result<String, CliError> {
    csv_string(
        &CONSISTENCY_HEADER,
        (0..report.n_grid.len()).map(|i| {
            vec![
                report.n_grid[i].to_string(),
                fmt_f64(report.chi2_bar[i]),
                fmt_f64(report.mse_q_sequence[i]),
                fmt_f64(report.ub_sequence[i]),
            ]
        }),
    )
}

pub fn verdict_line(report: &ConsistencyReport) -> String {
    format!("condition_met={} exponent={}", report.condition_met, fmt_f64(report.growth_exponent))
}

/// CSV body and the verdict line.
pub fn cmd_consistency(cfg: &ConsistencyRunConfig) -> Result<(String, String), CliError> {
    let report = run_consistency(cfg)?;
    Ok((consistency_csv(&report)?, verdict_line(&report)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DivergenceReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<DivergenceEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<DivergenceEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<DivergenceEstimate>,
}

/// Reads one finite value per line; blank lines are skipped.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("{}:{}: not a finite number: {l:?}", path.display(), i + 1)))
        })
        .collect()
}

pub fn run_divergence(cfg: &DivergenceRunConfig) -> Result<DivergenceReport, CliError> {
    cfg.validate()?;
    let mut report = DivergenceReport::default();
    if let (Some(p), Some(q)) = (cfg.p, cfg.q) {
        let p = ScalarGaussian::new(p.mean, p.var)?;
        let q = ScalarGaussian::new(q.mean, q.var)?;
        let closed = chi2_scalar_gaussian(&p, &q);
        if closed.is_finite() {
            report.quadrature = Some(chi2_quadrature(&p, &q, gaussian_pair_domain(&p, &q))?);
        }
        report.closed_form = Some(closed);
    }
    if let (Some(pp), Some(qp)) = (&cfg.p_samples, &cfg.q_samples) {
        let cells = cfg.cells.map_or(Cells::Auto, Cells::Fixed);
        report.partition = Some(chi2_partition_estimate(&read_samples(pp)?, &read_samples(qp)?, cells)?);
    }
    Ok(report)
}

pub fn cmd_divergence(cfg: &DivergenceRunConfig) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(&run_divergence(cfg)?)?;
    text.push('\n');
    Ok(text)
}
