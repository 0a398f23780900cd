use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{stream_rng, Stream};

pub const PILLAR_HEIGHTS: [f64; 4] = [1.5, 2.0, 2.5, 3.0];
const PILLAR_HALF_SIZE: f64 = 0.25;
const MIN_PILLAR_GAP: f64 = 1.5;
const MIN_WALL_CLEARANCE: f64 = 1.0;
const MAX_PLACEMENT_ATTEMPTS: usize = 20_000;

/// Axis-aligned cuboid standing on the ground.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pillar {
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
    pub height: f64,
}

impl Pillar {
    pub fn min_corner(&self) -> [f64; 3] {
        [self.center[0] - self.half_extents[0], self.center[1] - self.half_extents[1], 0.0]
    }

    pub fn max_corner(&self) -> [f64; 3] {
        [self.center[0] + self.half_extents[0], self.center[1] + self.half_extents[1], self.height]
    }

    /// Horizontal distance from `p` to the footprint (zero inside).
    pub fn xy_distance(&self, p: [f64; 2]) -> f64 {
        point_rect_distance(p, self.center, self.half_extents)
    }
}

/// Closed box centered on the origin in x/y, ground at `z = 0`.
///
/// Walls span `[0, extent.z]`; the vehicle altitude is limited to `[z_min, z_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub extent: [f64; 3],
    pub pillars: Vec<Pillar>,
    pub z_min: f64,
    pub z_max: f64,
    pub seed: u64,
}

impl World {
    pub fn empty(extent: [f64; 3], z_max: f64) -> Self {
        Self {
            extent,
            pillars: Vec::new(),
            z_min: 0.3,
            z_max,
            seed: 0,
        }
    }

    pub fn x_range(&self) -> (f64, f64) {
        (-0.5 * self.extent[0], 0.5 * self.extent[0])
    }

    pub fn y_range(&self) -> (f64, f64) {
        (-0.5 * self.extent[1], 0.5 * self.extent[1])
    }

    pub fn wall_height(&self) -> f64 {
        self.extent[2]
    }

    /// Horizontal distance from `p` to the nearest wall (negative outside).
    pub fn wall_distance(&self, p: [f64; 2]) -> f64 {
        let (x0, x1) = self.x_range();
        let (y0, y1) = self.y_range();
        (p[0] - x0).min(x1 - p[0]).min(p[1] - y0).min(y1 - p[1])
    }

    pub fn contains_xy(&self, p: [f64; 2]) -> bool {
        self.wall_distance(p) > 0.0
    }

    /// Smallest horizontal distance from `p` to any pillar footprint.
    pub fn pillar_clearance(&self, p: [f64; 2]) -> f64 {
        self.pillars.iter().map(|q| q.xy_distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn point_rect_distance(p: [f64; 2], center: [f64; 2], half: [f64; 2]) -> f64 {
    let dx = ((p[0] - center[0]).abs() - half[0]).max(0.0);
    let dy = ((p[1] - center[1]).abs() - half[1]).max(0.0);
    dx.hypot(dy)
}

/// Gap between two axis-aligned rectangles (zero when they overlap).
pub fn rect_gap(a: &Pillar, b: &Pillar) -> f64 {
    let gx = ((a.center[0] - b.center[0]).abs() - a.half_extents[0] - b.half_extents[0]).max(0.0);
    let gy = ((a.center[1] - b.center[1]).abs() - a.half_extents[1] - b.half_extents[1]).max(0.0);
    gx.hypot(gy)
}

/// Recipe for a seeded world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub extent: [f64; 3],
    pub pillars: usize,
    pub seed: u64,
    pub z_max: f64,
    /// Re-draw the height of every other pillar after placement.
    #[serde(default)]
    pub vary_heights: bool,
}

impl EnvSpec {
    /// Training environments #1..=#4 with 0, 4, 6 and 8 pillars.
    pub fn training(index: usize, seed: u64) -> Result<Self> {
        let pillars = match index {
            1 => 0,
            2 => 4,
            3 => 6,
            4 => 8,
            _ => return Err(Error::config(format!("training environment #{index} does not exist"))),
        };
        Ok(Self {
            extent: [12.0, 12.0, 3.0],
            pillars,
            seed: seed.wrapping_add(index as u64),
            z_max: 3.1,
            vary_heights: false,
        })
    }

    /// Evaluation #1: the layout of training #4 with some pillar heights changed.
    pub fn eval1(seed: u64) -> Self {
        Self {
            vary_heights: true,
            ..Self::training(4, seed).expect("env #4 exists")
        }
    }

    /// Evaluation #2: a 20 m arena with 21 pillars and a 3.6 m ceiling.
    pub fn eval2(seed: u64) -> Self {
        Self {
            extent: [20.0, 20.0, 3.0],
            pillars: 21,
            seed: seed.wrapping_add(100),
            z_max: 3.6,
            vary_heights: false,
        }
    }
}

pub fn build_environment(spec: &EnvSpec) -> Result<World> {
    if ![0, 4, 6, 8, 21].contains(&spec.pillars) {
        return Err(Error::config(format!("unsupported pillar count {}", spec.pillars)));
    }
    if spec.extent.iter().any(|&e| !(e > 0.0)) || !(spec.z_max > 0.3) {
        return Err(Error::config("world extent and ceiling must be positive"));
    }
    let mut world = World {
        extent: spec.extent,
        pillars: Vec::with_capacity(spec.pillars),
        z_min: 0.3,
        z_max: spec.z_max,
        seed: spec.seed,
    };
    let mut rng = stream_rng(spec.seed, Stream::World, spec.pillars as u64, 0);
    let margin = MIN_WALL_CLEARANCE + PILLAR_HALF_SIZE;
    let (x0, x1) = world.x_range();
    let (y0, y1) = world.y_range();
    if x1 - x0 <= 2.0 * margin || y1 - y0 <= 2.0 * margin {
        return Err(Error::config("world too small for pillars"));
    }
    let mut attempts = 0;
    while world.pillars.len() < spec.pillars {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::config(format!(
                "could not place {} pillars after {MAX_PLACEMENT_ATTEMPTS} attempts",
                spec.pillars
            )));
        }
        let candidate = Pillar {
            center: [rng.random_range(x0 + margin..x1 - margin), rng.random_range(y0 + margin..y1 - margin)],
            half_extents: [PILLAR_HALF_SIZE; 2],
            height: *PILLAR_HEIGHTS.choose(&mut rng).expect("non-empty"),
        };
        if world.pillars.iter().all(|p| rect_gap(p, &candidate) >= MIN_PILLAR_GAP) {
            world.pillars.push(candidate);
        }
    }
    if spec.vary_heights {
        for p in world.pillars.iter_mut().step_by(2) {
            let others: Vec<f64> = PILLAR_HEIGHTS.iter().copied().filter(|&h| h != p.height).collect();
            p.height = *others.choose(&mut rng).expect("non-empty");
        }
    }
    Ok(world)
}
