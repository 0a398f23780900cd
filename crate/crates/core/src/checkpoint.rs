//! Self-describing JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{CodecConstants, CHANNEL_ORDER, DEPTH_GRID, NORMALIZED_CHANNELS, ACTION_CHANNELS};
use crate::critic::{CriticParams, CRITIC_INPUT};
use crate::error::{Error, Result};
use crate::hddpg::{Networks, TrainConfig};
use crate::snn::NetworkParams;

pub const FORMAT: &str = "neuroplanner-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub seed: u64,
    pub episodes_done: usize,
    pub global_step: u64,
    pub updates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub time_steps: usize,
    pub codec: CodecConstants,
    pub channel_order: Vec<String>,
    pub depth_grid: (usize, usize),
    pub actor: NetworkParams,
    pub critic: CriticParams,
    pub target_actor: NetworkParams,
    pub target_critic: CriticParams,
    pub progress: Progress,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn new(cfg: &TrainConfig, nets: Networks, progress: Progress) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            time_steps: cfg.time_steps,
            codec: cfg.codec,
            channel_order: CHANNEL_ORDER.iter().map(|s| s.to_string()).collect(),
            depth_grid: DEPTH_GRID,
            actor: nets.actor,
            critic: nets.critic,
            target_actor: nets.target_actor,
            target_critic: nets.target_critic,
            progress,
            config: cfg.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::config(format!("not a checkpoint (format {:?})", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::config(format!(
                "checkpoint version {} is not supported (expected {VERSION})",
                self.version
            )));
        }
        if self.time_steps != self.config.time_steps {
            return Err(Error::config("checkpoint time_steps disagrees with its config"));
        }
        if self.channel_order.len() != NORMALIZED_CHANNELS
            || self.channel_order.iter().zip(CHANNEL_ORDER).any(|(a, b)| a != b)
        {
            return Err(Error::config("checkpoint uses a different input channel order"));
        }
        if self.depth_grid != DEPTH_GRID {
            return Err(Error::config("checkpoint uses a different depth grid"));
        }
        for (name, net) in [("actor", &self.actor), ("target_actor", &self.target_actor)] {
            if net.input_channels() != NORMALIZED_CHANNELS || net.output_channels() != ACTION_CHANNELS {
                return Err(Error::config(format!("{name} has the wrong input/output width")));
            }
        }
        for (name, net) in [("critic", &self.critic), ("target_critic", &self.target_critic)] {
            if net.input_dim() != CRITIC_INPUT {
                return Err(Error::config(format!("{name} has the wrong input width")));
            }
        }
        if !self.actor.same_shape(&self.target_actor) || !self.critic.same_shape(&self.target_critic) {
            return Err(Error::config("target networks differ in shape from their conventional copies"));
        }
        Ok(())
    }

    /// Rejects a checkpoint trained with a different number of time steps.
    pub fn require_time_steps(&self, time_steps: usize) -> Result<()> {
        if self.time_steps != time_steps {
            return Err(Error::config(format!(
                "checkpoint was trained with T={} but T={time_steps} was requested",
                self.time_steps
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Self = serde_json::from_str(&text)?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}
