//! TOML configuration. Every key is optional and defaults to the published
//! constants; unknown keys are rejected.
//!
//! ```toml
//! [sampler]
//! steps = 100
//! activation_threshold = 0.8
//! trans_std = 10.0
//! seed = 0
//! seq_delay = 0.0
//! binding_shift = 1.0
//! binding_window = [0.33, 0.66]
//!
//! [sampler.schedule]
//! kind = "exponential"
//! c = 10.0
//!
//! [sampler.decode]
//! t_max = 30.0
//! lambda = 30.0
//! argmax_threshold = 0.85
//! blend_threshold = 0.8
//! blend_weights = [0.8, 0.2]
//!
//! [curation]
//! min_chain_len = 30
//! max_total_len = 2048
//! swissprot_plddt = 85.0
//! afdb_plddt = 95.0
//! require_cluster_id = true
//!
//! [crop]
//! max_residues = 384
//! interface_cutoff = 8.0
//!
//! [fape]
//! clamp = 10.0
//! length_scale = 10.0
//! backbone_only = false
//!
//! [consistency]
//! coefficient = 0.00054
//! delta_t = 0.01
//! weight = 0.3
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{ConsistencyConfig, FapeConfig};
use crate::proteinio::{CropSpec, CurationPolicy};
use crate::sampler::SamplerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sampler: SamplerConfig,
    pub curation: CurationPolicy,
    pub crop: CropSpec,
    pub fape: FapeConfig,
    pub consistency: ConsistencyConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    /// Loads `path` when given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or(Ok(Config::default()), Config::load)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.sampler.validate().map_err(|e| invalid(&e))?;
        self.curation.validate().map_err(|e| invalid(&e))?;
        self.crop.validate().map_err(|e| invalid(&e))?;
        self.fape.validate().map_err(|e| invalid(&e))?;
        self.consistency.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
