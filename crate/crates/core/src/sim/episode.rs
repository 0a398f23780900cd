use serde::{Deserialize, Serialize};

use super::camera::{render_depth, Camera};
use super::kinematics::{check_collision, spherical_to_goal, step_kinematics, MavState};
use super::world::World;
use crate::codec::{pool_depth, Observation, SettingVelocity, DEPTH_FEATURES, DEPTH_GRID};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Goal,
    Collision,
    Timeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Goal => "goal",
            Status::Collision => "collision",
            Status::Timeout => "timeout",
        }
    }
}

/// Sign convention of the shaping term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressSign {
    /// `scale * (d_prev - d_cur)`: positive when approaching the goal.
    #[default]
    TowardGoal,
    /// `scale * (d_cur - d_prev)`.
    AwayFromGoal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub goal_reward: f64,
    pub collision_reward: f64,
    pub progress_scale: f64,
    pub goal_threshold: f64,
    pub obstacle_threshold: f64,
    pub progress_sign: ProgressSign,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal_reward: 30.0,
            collision_reward: -30.0,
            progress_scale: 15.0,
            goal_threshold: 0.54,
            obstacle_threshold: 0.5,
            progress_sign: ProgressSign::TowardGoal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardOutcome {
    pub reward: f64,
    pub done: bool,
    pub status: Option<Status>,
}

/// Reward for the move `prev -> cur`. Reaching the goal wins over a
/// simultaneous collision.
pub fn compute_reward(prev: &MavState, cur: &MavState, world: &World, goal: [f64; 3], cfg: &RewardConfig) -> RewardOutcome {
    let d_cur = cur.distance_to(goal);
    if d_cur < cfg.goal_threshold {
        return RewardOutcome {
            reward: cfg.goal_reward,
            done: true,
            status: Some(Status::Goal),
        };
    }
    if check_collision(cur, world, cfg.obstacle_threshold).collided {
        return RewardOutcome {
            reward: cfg.collision_reward,
            done: true,
            status: Some(Status::Collision),
        };
    }
    let progress = prev.distance_to(goal) - d_cur;
    let reward = match cfg.progress_sign {
        ProgressSign::TowardGoal => cfg.progress_scale * progress,
        ProgressSign::AwayFromGoal => -cfg.progress_scale * progress,
    };
    RewardOutcome {
        reward,
        done: false,
        status: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    /// Control period in seconds.
    pub dt: f64,
    pub takeoff_altitude: f64,
    /// Minimum horizontal distance from start and goal to any pillar.
    pub pillar_clearance: f64,
    pub camera: Camera,
    pub reward: RewardConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 500,
            dt: 0.2,
            takeoff_altitude: 1.0,
            pillar_clearance: 1.0,
            camera: Camera::default(),
            reward: RewardConfig::default(),
        }
    }
}

/// One row of an exported trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t_sim: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub v_xy_cmd: f64,
    pub v_yaw_cmd: f64,
    pub v_z_cmd: f64,
    pub reward: f64,
    pub d_goal: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub status: Status,
    pub steps: usize,
    /// Flown 3D path length in meters.
    pub path_length: f64,
    /// Simulated seconds.
    pub elapsed: f64,
    pub final_distance: f64,
}

impl EpisodeOutcome {
    pub fn average_speed(&self) -> Option<f64> {
        (self.elapsed > 0.0).then(|| self.path_length / self.elapsed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub status: Option<Status>,
}

/// Episode lifecycle: take-off teleport, observe, act, score.
#[derive(Clone, Debug)]
pub struct Episode<'w> {
    world: &'w World,
    goal: [f64; 3],
    state: MavState,
    cfg: EpisodeConfig,
    steps: usize,
    path_length: f64,
    status: Option<Status>,
    trajectory: Vec<TrajectoryRow>,
}

impl<'w> Episode<'w> {
    /// Places the vehicle at `start` on the ground and lifts it to the
    /// take-off altitude. A goal already within reach ends the episode at once.
    pub fn new(world: &'w World, start: [f64; 2], yaw: f64, goal: [f64; 3], cfg: EpisodeConfig) -> Result<Self> {
        let goal_xy = [goal[0], goal[1]];
        for (name, p) in [("start", start), ("goal", goal_xy)] {
            if world.wall_distance(p) <= cfg.reward.obstacle_threshold {
                return Err(Error::config(format!("{name} {p:?} is outside the world or touching a wall")));
            }
            if world.pillar_clearance(p) < cfg.pillar_clearance {
                return Err(Error::config(format!("{name} {p:?} is too close to a pillar")));
            }
        }
        if !(world.z_min..=world.z_max).contains(&goal[2]) {
            return Err(Error::config(format!("goal altitude {} outside height limits", goal[2])));
        }
        if !(cfg.dt > 0.0) {
            return Err(Error::config("control period must be positive"));
        }
        let state = MavState::at([start[0], start[1], cfg.takeoff_altitude], yaw);
        let d_goal = state.distance_to(goal);
        let status = (d_goal < cfg.reward.goal_threshold).then_some(Status::Goal);
        let first = TrajectoryRow {
            step: 0,
            t_sim: 0.0,
            x: state.position[0],
            y: state.position[1],
            z: state.position[2],
            yaw: state.yaw,
            v_xy_cmd: 0.0,
            v_yaw_cmd: 0.0,
            v_z_cmd: 0.0,
            reward: 0.0,
            d_goal,
        };
        Ok(Self {
            world,
            goal,
            state,
            cfg,
            steps: 0,
            path_length: 0.0,
            status,
            trajectory: vec![first],
        })
    }

    pub fn state(&self) -> &MavState {
        &self.state
    }

    pub fn goal(&self) -> [f64; 3] {
        self.goal
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.status.is_some()
    }

    pub fn status(&self) -> Option<Status> {
        self.status
    }

    pub fn observe(&self) -> Observation {
        let (r, theta, phi) = spherical_to_goal(&self.state, self.goal);
        let r = r.max(1e-9);
        let image = render_depth(&self.state, self.world, &self.cfg.camera);
        let pooled = pool_depth(&image, DEPTH_GRID, self.cfg.camera.range).expect("camera resolution divides the grid");
        let mut depth = [0.0; DEPTH_FEATURES];
        depth.copy_from_slice(&pooled);
        let v = self.state.velocity;
        Observation {
            r,
            theta,
            phi,
            v_xy: v.v_xy,
            v_yaw: v.v_yaw,
            v_z: v.v_z,
            depth,
        }
    }

    pub fn step(&mut self, cmd: SettingVelocity) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::config("episode already finished"));
        }
        let prev = self.state;
        self.state = step_kinematics(&prev, cmd, self.cfg.dt, (self.world.z_min, self.world.z_max));
        self.steps += 1;
        self.path_length += prev.distance_to(self.state.position);
        let mut outcome = compute_reward(&prev, &self.state, self.world, self.goal, &self.cfg.reward);
        if !outcome.done && self.steps >= self.cfg.max_steps {
            outcome.done = true;
            outcome.status = Some(Status::Timeout);
        }
        self.status = outcome.status;
        let s = &self.state;
        self.trajectory.push(TrajectoryRow {
            step: self.steps,
            t_sim: self.steps as f64 * self.cfg.dt,
            x: s.position[0],
            y: s.position[1],
            z: s.position[2],
            yaw: s.yaw,
            v_xy_cmd: cmd.v_xy,
            v_yaw_cmd: cmd.v_yaw,
            v_z_cmd: cmd.v_z,
            reward: outcome.reward,
            d_goal: s.distance_to(self.goal),
        });
        Ok(StepResult {
            reward: outcome.reward,
            done: outcome.done,
            status: outcome.status,
        })
    }

    pub fn outcome(&self) -> Option<EpisodeOutcome> {
        self.status.map(|status| EpisodeOutcome {
            status,
            steps: self.steps,
            path_length: self.path_length,
            elapsed: self.steps as f64 * self.cfg.dt,
            final_distance: self.state.distance_to(self.goal),
        })
    }

    pub fn trajectory(&self) -> &[TrajectoryRow] {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Vec<TrajectoryRow> {
        self.trajectory
    }
}

/// Anything that maps an observation to a velocity command.
pub trait Policy {
    fn act(&mut self, obs: &Observation, step: usize) -> SettingVelocity;
}

impl<F> Policy for F
where
    F: FnMut(&Observation, usize) -> SettingVelocity,
{
    fn act(&mut self, obs: &Observation, step: usize) -> SettingVelocity {
        self(obs, step)
    }
}

/// Runs a full episode to goal, collision or step budget.
pub fn run_episode<P: Policy + ?Sized>(
    world: &World,
    start: [f64; 2],
    yaw: f64,
    goal: [f64; 3],
    policy: &mut P,
    cfg: EpisodeConfig,
) -> Result<(EpisodeOutcome, Vec<TrajectoryRow>)> {
    let mut ep = Episode::new(world, start, yaw, goal, cfg)?;
    while !ep.is_done() {
        let obs = ep.observe();
        let cmd = policy.act(&obs, ep.steps());
        ep.step(cmd)?;
    }
    let outcome = ep.outcome().expect("finished episode has an outcome");
    Ok((outcome, ep.into_trajectory()))
}
