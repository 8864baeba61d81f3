//! JSON experiment configs. Keys carry their units (`_deg`, `_db`, `_us`).
//!
//! A config file is a flat object. Its keys override a base profile (the
//! defaults, or the fast profile with `--fast` / `"fast_profile": true`),
//! and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CliError;
use crate::consistency::DEFAULT_N_GRID;
use crate::doa::DEFAULT_SENSORS;
use crate::models::GaussianMixture1D;
use crate::toa::ToaConfig;

/// Keys accepted by every command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommonOptions {
    pub output_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fast_profile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleGrid {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub points: usize,
}

impl AngleGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_deg];
        }
        let step = (self.stop_deg - self.start_deg) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.stop_deg } else { self.start_deg + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaRunConfig {
    pub sensors: usize,
    pub phi_true_deg: f64,
    pub snr_db: f64,
    pub phi_grid: AngleGrid,
    pub trials: usize,
    pub seed: u64,
}

impl Default for DoaRunConfig {
    fn default() -> Self {
        Self {
            sensors: DEFAULT_SENSORS,
            phi_true_deg: 55.0,
            snr_db: 10.0,
            phi_grid: AngleGrid { start_deg: 50.0, stop_deg: 60.0, points: 101 },
            trials: 100_000,
            seed: 0x5eed,
        }
    }
}

impl DoaRunConfig {
    pub fn fast() -> Self {
        Self { trials: 10_000, ..Self::default() }
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.phi_grid.points == 0 {
            return Err(CliError::Config("phi_grid.points must be ≥ 1".into()));
        }
        if !(self.phi_grid.start_deg.is_finite() && self.phi_grid.stop_deg.is_finite()) {
            return Err(CliError::Config("phi_grid bounds must be finite".into()));
        }
        if self.phi_grid.points > 1 && !(self.phi_grid.start_deg < self.phi_grid.stop_deg) {
            return Err(CliError::Config("phi_grid must be ascending".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(CliError::Config("snr_db must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl MixtureSpec {
    pub fn build(&self) -> crate::Result<GaussianMixture1D> {
        GaussianMixture1D::new(self.weights.clone(), self.means.clone(), self.vars.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyRunConfig {
    pub noise: MixtureSpec,
    pub q_mean: f64,
    pub q_var: f64,
    pub n_grid: Vec<usize>,
}

impl Default for ConsistencyRunConfig {
    fn default() -> Self {
        Self {
            noise: MixtureSpec { weights: vec![0.5, 0.5], means: vec![-0.5, 0.5], vars: vec![0.75, 0.75] },
            q_mean: 0.0,
            q_var: 1.0,
            n_grid: DEFAULT_N_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean: f64,
    pub var: f64,
}

/// Divergence inputs: a Gaussian pair, a pair of sample files, or both.
/// Relative sample paths are resolved against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceRunConfig {
    pub p: Option<GaussianSpec>,
    pub q: Option<GaussianSpec>,
    pub p_samples: Option<PathBuf>,
    pub q_samples: Option<PathBuf>,
    /// Partition cell count; automatic when absent.
    pub cells: Option<usize>,
}

impl DivergenceRunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.p.is_some() != self.q.is_some() {
            return Err(CliError::Config("`p` and `q` must be given together".into()));
        }
        if self.p_samples.is_some() != self.q_samples.is_some() {
            return Err(CliError::Config("`p_samples` and `q_samples` must be given together".into()));
        }
        if self.p.is_none() && self.p_samples.is_none() {
            return Err(CliError::Config("need a Gaussian pair or a pair of sample files".into()));
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for path in [&mut self.p_samples, &mut self.q_samples].into_iter().flatten() {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

pub fn parse_document(text: &str) -> Result<Map<String, Value>, CliError> {
    match serde_json::from_str::<Value>(text)? {
        Value::Object(map) => Ok(map),
        _ => Err(CliError::Config("config must be a JSON object".into())),
    }
}

/// Removes `output_path`, `seed` and `fast_profile` from the document.
///
/// `seed` is removed only when `keep_seed` is false; scenario configs that
/// carry their own seed keep it in place.
pub fn take_common(doc: &mut Map<String, Value>, keep_seed: bool) -> Result<CommonOptions, CliError> {
    let output_path = match doc.remove("output_path") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(CliError::Config("output_path must be a string".into())),
    };
    let fast_profile = match doc.remove("fast_profile") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => b,
        Some(_) => return Err(CliError::Config("fast_profile must be a boolean".into())),
    };
    let seed = match if keep_seed { doc.get("seed").cloned() } else { doc.remove("seed") } {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64().ok_or_else(|| CliError::Config("seed must be a nonnegative integer".into()))?,
        ),
    };
    Ok(CommonOptions { output_path, seed, fast_profile })
}

/// Applies the keys of `overrides` on top of `base`, one level deep for
/// nested objects, then deserializes the result.
pub fn merge_onto<T: Serialize + DeserializeOwned>(base: &T, overrides: Map<String, Value>) -> Result<T, CliError> {
    let mut merged = match serde_json::to_value(base)? {
        Value::Object(map) => map,
        _ => unreachable!("configs serialize to objects"),
    };
    for (key, value) in overrides {
        match (merged.get_mut(&key), value) {
            (Some(Value::Object(inner)), Value::Object(patch)) => {
                for (k, v) in patch {
                    inner.insert(k, v);
                }
            }
            (_, value) => {
                merged.insert(key, value);
            }
        }
    }
    Ok(serde_json::from_value(Value::Object(merged))?)
}

pub fn toa_config(doc: Map<String, Value>, fast: bool) -> Result<ToaConfig, CliError> {
    let base = if fast { ToaConfig::fast() } else { ToaConfig::default() };
    let cfg: ToaConfig = merge_onto(&base, doc)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn doa_config(doc: Map<String, Value>, fast: bool) -> Result<DoaRunConfig, CliError> {
    let base = if fast { DoaRunConfig::fast() } else { DoaRunConfig::default() };
    let cfg: DoaRunConfig = merge_onto(&base, doc)?;
    cfg.validate()?;
    Ok(cfg)
}
