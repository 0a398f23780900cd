//! Deterministic kinematic micro-aerial-vehicle simulator.
//!
//! Worlds are closed boxes with cuboid pillars; the vehicle follows velocity
//! commands exactly (first-order kinematics) and observes a ray-cast depth
//! image from a forward-facing pinhole camera.

mod camera;
mod episode;
mod kinematics;
mod task;
mod world;

pub use camera::{cast_ray, ray_box, render_depth, Camera};
pub use episode::{
    compute_reward, run_episode, Episode, EpisodeConfig, EpisodeOutcome, Policy, ProgressSign, RewardConfig,
    RewardOutcome, Status, StepResult, TrajectoryRow,
};
pub use kinematics::{check_collision, spherical_to_goal, step_kinematics, wrap_angle, Collision, MavState};
pub use task::{Task, TaskSampler};
pub use world::{build_environment, point_rect_distance, rect_gap, EnvSpec, Pillar, World, PILLAR_HEIGHTS};
