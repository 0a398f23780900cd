use rand::Rng;
use serde::{Deserialize, Serialize};

use super::world::World;
use crate::error::{Error, Result};

/// A start pose on the ground and a goal point in the air.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub start: [f64; 2],
    pub yaw: f64,
    pub goal: [f64; 3],
}

/// Rejection sampler for start/goal pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSampler {
    pub wall_clearance: f64,
    pub pillar_clearance: f64,
    /// Minimum horizontal start-goal separation.
    pub min_separation: f64,
    pub goal_altitude: (f64, f64),
}

impl Default for TaskSampler {
    fn default() -> Self {
        Self {
            wall_clearance: 1.0,
            pillar_clearance: 1.0,
            min_separation: 2.0,
            goal_altitude: (0.5, 2.5),
        }
    }
}

impl TaskSampler {
    fn free_point<R: Rng + ?Sized>(&self, world: &World, rng: &mut R) -> Option<[f64; 2]> {
        let (x0, x1) = world.x_range();
        let (y0, y1) = world.y_range();
        let c = self.wall_clearance;
        for _ in 0..10_000 {
            let p = [rng.random_range(x0 + c..x1 - c), rng.random_range(y0 + c..y1 - c)];
            if world.pillar_clearance(p) >= self.pillar_clearance {
                return Some(p);
            }
        }
        None
    }

    pub fn sample<R: Rng + ?Sized>(&self, world: &World, rng: &mut R) -> Result<Task> {
        let fail = || Error::config("could not sample a free start/goal pair");
        for _ in 0..1000 {
            let start = self.free_point(world, rng).ok_or_else(fail)?;
            let goal = self.free_point(world, rng).ok_or_else(fail)?;
            if (goal[0] - start[0]).hypot(goal[1] - start[1]) < self.min_separation {
                continue;
            }
            let (lo, hi) = self.goal_altitude;
            let z = rng.random_range(lo.max(world.z_min)..=hi.min(world.z_max));
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            return Ok(Task {
                start,
                yaw,
                goal: [goal[0], goal[1], z],
            });
        }
        Err(fail())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_environment, EnvSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_respect_clearances() {
        let world = build_environment(&EnvSpec::eval2(3)).unwrap();
        let sampler = TaskSampler::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let t = sampler.sample(&world, &mut rng).unwrap();
            for p in [t.start, [t.goal[0], t.goal[1]]] {
                assert!(world.wall_distance(p) >= 1.0);
                assert!(world.pillar_clearance(p) >= 1.0);
            }
            assert!((t.goal[0] - t.start[0]).hypot(t.goal[1] - t.start[1]) >= 2.0);
            assert!((0.5..=2.5).contains(&t.goal[2]));
        }
    }
}
