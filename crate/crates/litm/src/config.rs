//! JSON configuration documents.

use std::path::Path;

use litm_core::data::SynthConfig;
use litm_core::model::ModelConfig;
use litm_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::LitmError;

/// Model and training settings for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), LitmError> {
        self.train.validate(&self.model).map_err(|e| LitmError::Config(e.to_string()))
    }
}

fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LitmError> {
    let text = std::fs::read_to_string(path).map_err(|e| LitmError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LitmError::Config(format!("{}: {e}", path.display())))
}

pub fn load_run(path: &Path) -> Result<RunConfig, LitmError> {
    let cfg: RunConfig = read(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_synth(path: &Path) -> Result<SynthConfig, LitmError> {
    let cfg: SynthConfig = read(path)?;
    cfg.validate().map_err(|e| LitmError::Config(e.to_string()))?;
    Ok(cfg)
}
