//! Experiment configuration: a TOML file with a mandatory schema string,
//! the model tables (or a named builtin), and the sweep parameters.

use std::collections::BTreeMap;
use std::path::Path;

use coordpolar::model::{bsc_chain_model, build_model, reference_model, CoordinationModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_SCHEMA: &str = "coordpolar-experiment-v1";

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema {got:?} (expected {expected:?})")]
    SchemaMismatch { got: String, expected: &'static str },
    #[error("model: {0}")]
    Model(#[from] coordpolar::model::ModelError),
    #[error("unknown builtin model {0:?}")]
    UnknownBuiltin(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Either a named builtin or explicit probability tables. Defaults to the
/// reference model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// "reference", "identity", or "bsc-chain" (needs q and p)
    pub builtin: Option<String>,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub p_s: Option<Vec<f64>>,
    pub p_u_given_s: Option<Vec<Vec<f64>>>,
    pub p_x_given_us: Option<Vec<Vec<f64>>>,
    pub p_y_given_x: Option<Vec<Vec<f64>>>,
    pub p_shat_given_uy: Option<Vec<Vec<f64>>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            builtin: Some("reference".into()),
            q: None,
            p: None,
            p_s: None,
            p_u_given_s: None,
            p_x_given_us: None,
            p_y_given_x: None,
            p_shat_given_uy: None,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<CoordinationModel, ConfigError> {
        if let Some(name) = &self.builtin {
            return match name.as_str() {
                "reference" => Ok(reference_model()),
                "identity" => Ok(coordpolar::model::identity_model()),
                "bsc-chain" => {
                    let q = self.q.ok_or_else(|| {
                        ConfigError::Invalid("bsc-chain requires q".into())
                    })?;
                    let p = self.p.ok_or_else(|| {
                        ConfigError::Invalid("bsc-chain requires p".into())
                    })?;
                    Ok(bsc_chain_model(q, p))
                }
                other => Err(ConfigError::UnknownBuiltin(other.to_string())),
            };
        }
        let missing = || ConfigError::Invalid("explicit model requires all five tables".into());
        Ok(build_model(
            self.p_s.clone().ok_or_else(missing)?,
            self.p_u_given_s.clone().ok_or_else(missing)?,
            self.p_x_given_us.clone().ok_or_else(missing)?,
            self.p_y_given_x.clone().ok_or_else(missing)?,
            self.p_shat_given_uy.clone().ok_or_else(missing)?,
        )?)
    }
}

fn default_beta() -> f64 {
    0.25
}
fn default_samples() -> usize {
    2000
}
fn default_trials() -> usize {
    50
}
fn default_output() -> String {
    "runs.csv".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default)]
    pub model: ModelConfig,
    /// log2 of the block lengths to sweep
    pub m_exponents: Vec<u32>,
    pub k_values: Vec<usize>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// optional per-n override, keyed by the block length as a string
    #[serde(default)]
    pub beta_by_n: BTreeMap<String, f64>,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_trials")]
    pub trials_per_point: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub genie_mode: bool,
    #[serde(default)]
    pub include_last_block_in_type: bool,
    /// run models outside the region with a truncated chaining injection;
    /// requires genie_mode
    #[serde(default)]
    pub force_infeasible: bool,
    #[serde(default = "default_output")]
    pub output: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != CONFIG_SCHEMA {
            return Err(ConfigError::SchemaMismatch {
                got: self.schema.clone(),
                expected: CONFIG_SCHEMA,
            });
        }
        if self.m_exponents.is_empty() || self.k_values.is_empty() {
            return Err(ConfigError::Invalid("empty sweep".into()));
        }
        if self.trials_per_point == 0 {
            return Err(ConfigError::Invalid("trials_per_point must be ≥ 1".into()));
        }
        if !(0.0 < self.beta && self.beta < 0.5) {
            return Err(ConfigError::Invalid(format!("beta {} outside (0, 1/2)", self.beta)));
        }
        for (key, &b) in &self.beta_by_n {
            if key.parse::<usize>().map(|n| !n.is_power_of_two()).unwrap_or(true) {
                return Err(ConfigError::Invalid(format!("beta_by_n key {key:?} is not a power-of-two block length")));
            }
            if !(0.0 < b && b < 0.5) {
                return Err(ConfigError::Invalid(format!("beta_by_n[{key}] = {b} outside (0, 1/2)")));
            }
        }
        if self.k_values.contains(&0) {
            return Err(ConfigError::Invalid("k must be ≥ 1".into()));
        }
        if self.force_infeasible && !self.genie_mode {
            return Err(ConfigError::Invalid(
                "force_infeasible requires genie_mode (the last-block code cannot carry an oversized A3)".into(),
            ));
        }
        Ok(())
    }

    pub fn beta_for(&self, n: usize) -> f64 {
        self.beta_by_n.get(&n.to_string()).copied().unwrap_or(self.beta)
    }
}
