use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::kinematics::MavState;
use super::world::World;
use crate::codec::DepthRange;

/// Forward-looking pinhole depth camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    /// Mount offset above the vehicle origin.
    pub mount_height: f64,
    pub range: DepthRange,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            hfov_deg: 74.0,
            vfov_deg: 62.0,
            mount_height: 0.14,
            range: DepthRange::default(),
        }
    }
}

impl Camera {
    /// Unit ray direction in the body frame (x forward, y left, z up) for a
    /// pixel; row 0 is the top of the image, column 0 the left edge.
    pub fn body_ray(&self, row: usize, col: usize) -> [f64; 3] {
        let u = (col as f64 + 0.5) / self.width as f64 * 2.0 - 1.0;
        let v = (row as f64 + 0.5) / self.height as f64 * 2.0 - 1.0;
        let left = -u * (0.5 * self.hfov_deg.to_radians()).tan();
        let up = -v * (0.5 * self.vfov_deg.to_radians()).tan();
        let n = (1.0 + left * left + up * up).sqrt();
        [1.0 / n, left / n, up / n]
    }
}

/// Slab test. Returns the parametric entry and exit distances of the line
/// `origin + t * dir` through the box, if it intersects for some `t >= 0`.
pub fn ray_box(origin: [f64; 3], dir: [f64; 3], min: [f64; 3], max: [f64; 3]) -> Option<(f64, f64)> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for i in 0..3 {
        if dir[i] == 0.0 {
            if origin[i] < min[i] || origin[i] > max[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let (a, b) = ((min[i] - origin[i]) * inv, (max[i] - origin[i]) * inv);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        t_enter = t_enter.max(a);
        t_exit = t_exit.min(b);
    }
    (t_enter <= t_exit && t_exit >= 0.0).then_some((t_enter, t_exit))
}

/// Distance to the first surface hit by a unit ray: pillar faces or the
/// inner faces of the boundary walls. `None` if the ray escapes.
pub fn cast_ray(origin: [f64; 3], dir: [f64; 3], world: &World) -> Option<f64> {
    let mut best = f64::INFINITY;
    for p in &world.pillars {
        if let Some((t0, _)) = ray_box(origin, dir, p.min_corner(), p.max_corner()) {
            if t0 >= 0.0 && t0 < best {
                best = t0;
            }
        }
    }
    let (x0, x1) = world.x_range();
    let (y0, y1) = world.y_range();
    let mut t_wall = f64::INFINITY;
    if dir[0] > 0.0 {
        t_wall = t_wall.min((x1 - origin[0]) / dir[0]);
    } else if dir[0] < 0.0 {
        t_wall = t_wall.min((x0 - origin[0]) / dir[0]);
    }
    if dir[1] > 0.0 {
        t_wall = t_wall.min((y1 - origin[1]) / dir[1]);
    } else if dir[1] < 0.0 {
        t_wall = t_wall.min((y0 - origin[1]) / dir[1]);
    }
    if t_wall.is_finite() && t_wall >= 0.0 && t_wall < best {
        let z = origin[2] + t_wall * dir[2];
        if (0.0..=world.wall_height()).contains(&z) {
            best = t_wall;
        }
    }
    best.is_finite().then_some(best)
}

/// Depth image `[height x width]` of ray distances; invalid pixels (no hit,
/// or outside the sensor range) are NaN.
pub fn render_depth(mav: &MavState, world: &World, camera: &Camera) -> Array2<f64> {
    let origin = [mav.position[0], mav.position[1], mav.position[2] + camera.mount_height];
    let (s, c) = mav.yaw.sin_cos();
    Array2::from_shape_fn((camera.height, camera.width), |(row, col)| {
        let b = camera.body_ray(row, col);
        let dir = [c * b[0] - s * b[1], s * b[0] + c * b[1], b[2]];
        match cast_ray(origin, dir, world) {
            Some(d) if camera.range.is_valid(d) => d,
            _ => f64::NAN,
        }
    })
}
