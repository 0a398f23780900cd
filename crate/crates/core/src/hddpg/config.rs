use serde::{Deserialize, Serialize};

use crate::codec::CodecConstants;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sim::{EpisodeConfig, ProgressSign, TaskSampler};
use crate::snn::NeuronConstants;

/// Time-step counts accepted without `allow_any_time_steps`.
pub const STANDARD_TIME_STEPS: [usize; 5] = [5, 10, 15, 20, 25];

/// Everything that shapes a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub time_steps: usize,
    pub allow_any_time_steps: bool,
    pub gamma: f64,
    pub soft_update_rate: f64,
    /// Soft-update the targets every this many optimizer steps.
    pub target_update_interval: usize,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub buffer_capacity: usize,
    /// Gradient updates per environment step once the buffer is warm.
    pub updates_per_step: usize,
    pub noise_std_start: f64,
    pub noise_std_end: f64,
    /// Episodes spent in each training environment, in order.
    pub curriculum_episodes: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Actor weights and biases start uniform in `±scale/sqrt(fan_in)`,
    /// hidden biases shifted by `actor_init_bias`.
    pub actor_init_scale: f64,
    pub actor_init_bias: f64,
    /// Extra factor on the output layer's initial range.
    pub actor_output_gain: f64,
    /// Bias offset of the output layer.
    pub actor_output_bias: f64,
    pub neuron: NeuronConstants,
    pub codec: CodecConstants,
    pub episode: EpisodeConfig,
    pub task: TaskSampler,
    pub world_seed: u64,
    /// Write a checkpoint every this many episodes (0 disables periodic saves).
    pub checkpoint_every: usize,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            time_steps: 5,
            allow_any_time_steps: false,
            gamma: 0.99,
            soft_update_rate: 0.01,
            target_update_interval: 1,
            batch_size: 256,
            lr_actor: 1e-5,
            lr_critic: 1e-4,
            buffer_capacity: 100_000,
            updates_per_step: 1,
            noise_std_start: 0.25,
            noise_std_end: 0.05,
            curriculum_episodes: vec![100, 200, 300, 400],
            actor_hidden: vec![512; 3],
            critic_hidden: vec![512; 3],
            actor_init_scale: 1.5,
            actor_init_bias: 0.2,
            actor_output_gain: 0.3,
            actor_output_bias: 0.2,
            neuron: NeuronConstants::default(),
            codec: CodecConstants::default(),
            episode: EpisodeConfig::default(),
            task: TaskSampler::default(),
            world_seed: 0,
            checkpoint_every: 100,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    /// Reduced networks and batch with faster learning rates, sized to
    /// learn the empty arena within a hundred episodes on one core.
    pub fn desk() -> Self {
        Self {
            batch_size: 128,
            lr_actor: 5e-5,
            lr_critic: 5e-4,
            soft_update_rate: 0.0025,
            curriculum_episodes: vec![100],
            actor_hidden: vec![128; 3],
            critic_hidden: vec![128; 3],
            checkpoint_every: 0,
            ..Self::default()
        }
    }

    pub fn with_progress_sign(mut self, sign: ProgressSign) -> Self {
        self.episode.reward.progress_sign = sign;
        self
    }

    pub fn total_episodes(&self) -> usize {
        self.curriculum_episodes.iter().sum()
    }

    /// Exploration std for a zero-based episode index, decaying linearly
    /// over the whole curriculum.
    pub fn noise_std(&self, episode: usize) -> f64 {
        let total = self.total_episodes();
        if total <= 1 {
            return self.noise_std_start;
        }
        let frac = (episode as f64 / (total - 1) as f64).min(1.0);
        self.noise_std_start + (self.noise_std_end - self.noise_std_start) * frac
    }

    /// One-based training environment for a zero-based episode index.
    pub fn environment_for(&self, episode: usize) -> usize {
        let mut acc = 0;
        for (i, n) in self.curriculum_episodes.iter().enumerate() {
            acc += n;
            if episode < acc {
                return i + 1;
            }
        }
        self.curriculum_episodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m));
        if self.time_steps == 0 {
            return bad("time_steps must be at least 1");
        }
        if !self.allow_any_time_steps && !STANDARD_TIME_STEPS.contains(&self.time_steps) {
            return Err(Error::config(format!(
                "time_steps {} not in {STANDARD_TIME_STEPS:?} (set allow_any_time_steps to override)",
                self.time_steps
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.soft_update_rate > 0.0 && self.soft_update_rate <= 1.0) {
            return bad("soft_update_rate must lie in (0, 1]");
        }
        if self.target_update_interval == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("target_update_interval, batch_size and buffer_capacity must be positive");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.noise_std_start < 0.0 || self.noise_std_end < 0.0 {
            return bad("noise std must be non-negative");
        }
        if self.curriculum_episodes.is_empty() || self.curriculum_episodes.len() > 4 {
            return bad("curriculum must list one to four training environments");
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        if self.episode.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.noise_std(0), 0.25);
        assert!((cfg.noise_std(999) - 0.05).abs() < 1e-15);
        assert!(cfg.noise_std(500) < 0.25 && cfg.noise_std(500) > 0.05);
    }

    #[test]
    fn curriculum_boundaries() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.total_episodes(), 1000);
        assert_eq!(cfg.environment_for(0), 1);
        assert_eq!(cfg.environment_for(99), 1);
        assert_eq!(cfg.environment_for(100), 2);
        assert_eq!(cfg.environment_for(600), 4);
    }

    #[test]
    fn rejects_bad_time_steps() {
        let mut cfg = TrainConfig { time_steps: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.time_steps = 7;
        assert!(cfg.validate().is_err());
        cfg.allow_any_time_steps = true;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let cfg = TrainConfig::desk();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: TrainConfig = serde_json::from_str(r#"{"time_steps": 10}"#).unwrap();
        assert_eq!(partial.time_steps, 10);
    }
}
