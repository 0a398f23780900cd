//! Hybrid actor-critic training: spiking actor, dense critic, replay and
//! soft-updated targets.

mod agent;
mod config;
mod replay;
mod trainer;

pub use agent::{
    encode_next_states, encode_states, q_loss, q_loss_with_spikes, select_action, td_loss, td_loss_with_spikes,
    td_target, QLoss, TdLoss, CHUNK,
};
pub use config::{TrainConfig, STANDARD_TIME_STEPS};
pub use replay::{ReplayBuffer, Transition};
pub use trainer::{curriculum_worlds, EpisodeRecord, Networks, Trainer};
