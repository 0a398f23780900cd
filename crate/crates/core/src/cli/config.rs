use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hddpg::TrainConfig;

/// Contents of a run configuration file: run-level settings next to the
/// flat training keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Seed of the evaluation start/goal pairs and encodings.
    pub eval_seed: u64,
    pub eval_pairs: usize,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("run"),
            eval_seed: 0,
            eval_pairs: 100,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a JSON document, rejecting keys that map to no setting.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config("configuration must be a JSON object"))?;
        let known = serde_json::to_value(Self::default())?;
        let known = known.as_object().expect("struct serializes to an object");
        if let Some(k) = obj.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::config(format!("unknown configuration key {k:?}")));
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
