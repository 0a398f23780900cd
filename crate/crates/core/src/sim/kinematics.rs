use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::world::World;
use crate::codec::SettingVelocity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MavState {
    pub position: [f64; 3],
    pub yaw: f64,
    /// Last commanded velocity, honored exactly by the kinematics.
    pub velocity: SettingVelocity,
}

impl MavState {
    pub fn at(position: [f64; 3], yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
            velocity: SettingVelocity::default(),
        }
    }

    pub fn distance_to(&self, p: [f64; 3]) -> f64 {
        let d: f64 = (0..3).map(|i| (p[i] - self.position[i]).powi(2)).sum();
        d.sqrt()
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Goal position in spherical coordinates centered on the vehicle: radial
/// distance, polar angle from +z, and azimuth relative to the current yaw.
pub fn spherical_to_goal(mav: &MavState, goal: [f64; 3]) -> (f64, f64, f64) {
    let d = [
        goal[0] - mav.position[0],
        goal[1] - mav.position[1],
        goal[2] - mav.position[2],
    ];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (d[2] / r).clamp(-1.0, 1.0).acos();
    let phi = if d[0] == 0.0 && d[1] == 0.0 {
        0.0
    } else {
        wrap_angle(d[1].atan2(d[0]) - mav.yaw)
    };
    (r, theta, phi)
}

/// First-order kinematics: rotate, then translate along the new heading.
pub fn step_kinematics(mav: &MavState, cmd: SettingVelocity, dt: f64, z_limits: (f64, f64)) -> MavState {
    let yaw = wrap_angle(mav.yaw + cmd.v_yaw * dt);
    let [x, y, z] = mav.position;
    MavState {
        position: [
            x + cmd.v_xy * yaw.cos() * dt,
            y + cmd.v_xy * yaw.sin() * dt,
            (z + cmd.v_z * dt).clamp(z_limits.0, z_limits.1),
        ],
        yaw,
        velocity: cmd,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collision {
    pub collided: bool,
    pub nearest_distance: f64,
}

/// Obstacle-passing judgment: pillars no taller than the vehicle are ignored;
/// walls always count. Distances are measured in the horizontal plane.
pub fn check_collision(mav: &MavState, world: &World, threshold: f64) -> Collision {
    let p = [mav.position[0], mav.position[1]];
    let pillars = world
        .pillars
        .iter()
        .filter(|q| q.height > mav.position[2])
        .map(|q| q.xy_distance(p))
        .fold(f64::INFINITY, f64::min);
    let nearest = pillars.min(world.wall_distance(p));
    Collision {
        collided: nearest < threshold,
        nearest_distance: nearest,
    }
}
