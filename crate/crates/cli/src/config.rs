//! Run configuration: one JSON document, overridable by flags.

use std::path::Path;

use chaosforge::balance::{
    BalanceMetric, BalanceParams, DEFAULT_ALPHA_CV, DEFAULT_ALPHA_ENTROPY, DEFAULT_CURATION_FRACTION,
};
use chaosforge::clustering::{DEFAULT_K_MAX, DEFAULT_K_STAR_FACTOR};
use chaosforge::eval::DEFAULT_GAMMA;
use chaosforge::series::DEFAULT_PATCH_LENGTH;
use chaosforge::transition::{ForecastMode, DEFAULT_ACTION_SCALE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, Context};

/// Every numeric knob of a run. File paths and worker counts are flags
/// only, so they never influence [`RunConfig::hash`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub patch_length: usize,
    pub softdtw_gamma: f64,
    pub balance_alpha_entropy: f64,
    pub balance_alpha_cv: f64,
    pub balance_metric: BalanceMetric,
    pub curation_fraction: f64,
    pub kmeans_kmax: usize,
    pub k_star_factor: usize,
    pub action_scale: f64,
    pub forecast_mode: ForecastMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            patch_length: DEFAULT_PATCH_LENGTH,
            softdtw_gamma: DEFAULT_GAMMA,
            balance_alpha_entropy: DEFAULT_ALPHA_ENTROPY,
            balance_alpha_cv: DEFAULT_ALPHA_CV,
            balance_metric: BalanceMetric::Entropy,
            curation_fraction: DEFAULT_CURATION_FRACTION,
            kmeans_kmax: DEFAULT_K_MAX,
            k_star_factor: DEFAULT_K_STAR_FACTOR,
            action_scale: DEFAULT_ACTION_SCALE,
            forecast_mode: ForecastMode::Sample,
        }
    }
}

/// Flag values that win over the config file when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub patch_length: Option<usize>,
    pub gamma: Option<f64>,
    pub fraction: Option<f64>,
    pub metric: Option<BalanceMetric>,
    pub beta: Option<f64>,
    pub mode: Option<ForecastMode>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).context(p.display().to_string())?;
                serde_json::from_str(&text).context(format!("config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.patch_length {
            self.patch_length = v;
        }
        if let Some(v) = o.gamma {
            self.softdtw_gamma = v;
        }
        if let Some(v) = o.fraction {
            self.curation_fraction = v;
        }
        if let Some(v) = o.metric {
            self.balance_metric = v;
        }
        if let Some(v) = o.beta {
            self.action_scale = v;
        }
        if let Some(v) = o.mode {
            self.forecast_mode = v;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let checks = [
            (self.patch_length >= 2, "patch_length must be at least 2"),
            (self.softdtw_gamma.is_finite() && self.softdtw_gamma >= 0.0, "softdtw_gamma must be finite and >= 0"),
            (unit(self.balance_alpha_entropy), "balance_alpha_entropy must lie in [0, 1]"),
            (unit(self.balance_alpha_cv), "balance_alpha_cv must lie in [0, 1]"),
            (self.curation_fraction > 0.0 && self.curation_fraction <= 1.0, "curation_fraction must lie in (0, 1]"),
            (self.kmeans_kmax >= 1, "kmeans_kmax must be at least 1"),
            (self.k_star_factor >= 1, "k_star_factor must be at least 1"),
            (self.action_scale.is_finite() && self.action_scale >= 0.0, "action_scale must be finite and >= 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(CliError::input(format!("config: {msg}"))),
            None => Ok(()),
        }
    }

    pub fn balance_params(&self) -> BalanceParams {
        BalanceParams { alpha_entropy: self.balance_alpha_entropy, alpha_cv: self.balance_alpha_cv }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }
}
