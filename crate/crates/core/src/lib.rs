//! Spiking actor-critic planner for point-to-point navigation of a micro
//! aerial vehicle.
//!
//! * [`snn`]: two-state LIF spiking actor with spatio-temporal backprop.
//! * [`codec`]: state normalization, spike encoding/decoding, velocity mapping.
//! * [`critic`]: rectifier MLP critic with exact reverse-mode gradients.
//! * [`hddpg`]: replay buffer, losses, soft updates and the training loop.
//! * [`sim`]: deterministic kinematic simulator with a ray-cast depth camera.
//! * [`cli`]: configuration, evaluation protocol and reporting.

pub mod checkpoint;
pub mod cli;
pub mod codec;
pub mod critic;
pub mod error;
pub mod exec;
pub mod hddpg;
pub mod optim;
pub mod seed;
pub mod sim;
pub mod snn;

pub use error::{Error, Result};
pub use exec::Execution;
