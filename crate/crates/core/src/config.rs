//! Run configuration, loaded from TOML and overridden by command-line flags.
//!
//! Only the location of the default config file may come from the
//! environment ([`CONFIG_ENV_VAR`]); every setting lives in the file or the
//! flags, so a run is reproducible from its config alone.
//!
//! ```toml
//! count = 10
//! ks = [1, 5, 10]
//! samplers = ["ours", "nms-kmeans", "kmeans", "topk"]
//! master_seed = 2024
//! scenarios = 10000
//!
//! [sampling]
//! loss = "min-ade"
//! nms = { threshold = 1.0 }
//! optimizer = { learning_rate = 0.1, steps = 256 }
//!
//! [world]
//! horizon = 12
//!
//! [sweep]
//! proposal_counts = [30, 60, 90]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::harness::{
    SamplerKind, SamplerSettings, DEFAULT_COUNT, DEFAULT_KS, DEFAULT_MASTER_SEED, DEFAULT_NMS_THRESHOLDS,
    DEFAULT_PROPOSAL_COUNTS, DEFAULT_SCENARIOS, DEFAULT_SWEEP_COUNT, DEFAULT_SWEEP_SCENARIOS,
};
use crate::synth::{EnsembleEmulation, WorldConfig};

/// Environment variable naming the config file used when no `--config` is given.
pub const CONFIG_ENV_VAR: &str = "TRAJSAMPLE_CONFIG";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Re-roots a library validation error under `prefix`.
fn nested(prefix: &str, err: Error) -> ConfigError {
    match err {
        Error::InvalidConfig { field, message } if prefix.is_empty() || field.starts_with(prefix) => {
            ConfigError::Invalid { field, message }
        }
        Error::InvalidConfig { field, message } => ConfigError::Invalid {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => ConfigError::invalid(prefix, other.to_string()),
    }
}

/// Settings of the proposal-count and NMS-threshold sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scenarios: usize,
    /// Candidates per scenario; also the `k` scored.
    pub count: usize,
    pub samplers: Vec<String>,
    pub proposal_counts: Vec<usize>,
    pub nms_thresholds: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scenarios: DEFAULT_SWEEP_SCENARIOS,
            count: DEFAULT_SWEEP_COUNT,
            samplers: vec!["topk".into(), "ours".into()],
            proposal_counts: DEFAULT_PROPOSAL_COUNTS.to_vec(),
            nms_thresholds: DEFAULT_NMS_THRESHOLDS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Candidates drawn per scenario (S).
    pub count: usize,
    /// k values scored by the metrics; each at most `count`.
    pub ks: Vec<usize>,
    pub samplers: Vec<String>,
    pub master_seed: u64,
    /// Worker threads; unset uses every core.
    pub threads: Option<usize>,
    /// Scenarios generated when no input file is given.
    pub scenarios: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Per-sampler wall-clock CSV of `compare`.
    pub timing_output: Option<PathBuf>,
    pub sampling: SamplerSettings,
    pub world: WorldConfig,
    pub ensemble: EnsembleEmulation,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            count: DEFAULT_COUNT,
            ks: DEFAULT_KS.to_vec(),
            samplers: SamplerKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            master_seed: DEFAULT_MASTER_SEED,
            threads: None,
            scenarios: DEFAULT_SCENARIOS,
            input: None,
            output: None,
            timing_output: None,
            sampling: SamplerSettings::default(),
            world: WorldConfig::default(),
            ensemble: EnsembleEmulation::default(),
            sweep: SweepConfig::default(),
        }
    }
}

fn parse_samplers(field: &str, names: &[String]) -> Result<Vec<SamplerKind>, ConfigError> {
    if names.is_empty() {
        return Err(ConfigError::invalid(field, "must list at least one sampler"));
    }
    names
        .iter()
        .enumerate()
        .map(|(i, name)| name.parse().map_err(|e: String| ConfigError::invalid(format!("{field}[{i}]"), e)))
        .collect()
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, path)
    }

    /// The file named by `--config`, else by [`CONFIG_ENV_VAR`], else defaults.
    pub fn resolve(flag: Option<&Path>) -> Result<Self, ConfigError> {
        let from_env = std::env::var_os(CONFIG_ENV_VAR).filter(|v| !v.is_empty()).map(PathBuf::from);
        match flag.map(Path::to_path_buf).or(from_env) {
            Some(path) => Self::load(&path),
            None => Ok(Self::default()),
        }
    }

    /// Checks every field; errors carry the field path, e.g. `samplers[1]`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.count == 0 {
            return Err(ConfigError::invalid("count", "must be at least 1"));
        }
        if self.ks.is_empty() {
            return Err(ConfigError::invalid("ks", "must list at least one k"));
        }
        for (i, &k) in self.ks.iter().enumerate() {
            if k == 0 || k > self.count {
                return Err(ConfigError::invalid(
                    format!("ks[{i}]"),
                    format!("must lie in 1..={} (the candidate count)", self.count),
                ));
            }
        }
        parse_samplers("samplers", &self.samplers)?;
        if self.threads == Some(0) {
            return Err(ConfigError::invalid("threads", "must be at least 1"));
        }
        if self.scenarios == 0 {
            return Err(ConfigError::invalid("scenarios", "must be at least 1"));
        }
        self.sampling.validate(self.count).map_err(|e| nested("sampling", e))?;
        self.world.validate().map_err(|e| nested("world", e))?;
        self.ensemble.validate().map_err(|e| nested("ensemble", e))?;
        self.validate_sweep()
    }

    fn validate_sweep(&self) -> Result<(), ConfigError> {
        let sweep = &self.sweep;
        if sweep.scenarios == 0 {
            return Err(ConfigError::invalid("sweep.scenarios", "must be at least 1"));
        }
        if sweep.count == 0 {
            return Err(ConfigError::invalid("sweep.count", "must be at least 1"));
        }
        if let Some(k) = self.sampling.loss_k {
            if k > sweep.count {
                return Err(ConfigError::invalid(
                    "sampling.loss_k",
                    format!("must not exceed sweep.count = {}", sweep.count),
                ));
            }
        }
        parse_samplers("sweep.samplers", &sweep.samplers)?;
        if sweep.proposal_counts.is_empty() {
            return Err(ConfigError::invalid("sweep.proposal_counts", "must list at least one count"));
        }
        let models = self.ensemble.models.len();
        for (i, &c) in sweep.proposal_counts.iter().enumerate() {
            if c == 0 || models == 0 || c % models != 0 {
                return Err(ConfigError::invalid(
                    format!("sweep.proposal_counts[{i}]"),
                    format!("must be a positive multiple of the {models} emulated models"),
                ));
            }
            if c < sweep.count {
                return Err(ConfigError::invalid(
                    format!("sweep.proposal_counts[{i}]"),
                    format!("must be at least sweep.count = {}", sweep.count),
                ));
            }
        }
        if sweep.nms_thresholds.is_empty() {
            return Err(ConfigError::invalid("sweep.nms_thresholds", "must list at least one threshold"));
        }
        for (i, &t) in sweep.nms_thresholds.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::invalid(
                    format!("sweep.nms_thresholds[{i}]"),
                    "must be positive and finite",
                ));
            }
        }
        Ok(())
    }

    /// The `samplers` list as kinds; call after [`validate`](Self::validate).
    pub fn sampler_kinds(&self) -> Result<Vec<SamplerKind>, ConfigError> {
        parse_samplers("samplers", &self.samplers)
    }

    pub fn sweep_sampler_kinds(&self) -> Result<Vec<SamplerKind>, ConfigError> {
        parse_samplers("sweep.samplers", &self.sweep.samplers)
    }
}
