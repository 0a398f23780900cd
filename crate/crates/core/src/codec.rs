//! Conversions between simulator quantities and spike tensors.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::SpikeArray;

pub const DEPTH_FEATURES: usize = 12;
pub const STATE_CHANNELS: usize = 18;
pub const NORMALIZED_CHANNELS: usize = 21;
pub const ACTION_CHANNELS: usize = 4;
pub const DEPTH_GRID: (usize, usize) = (3, 4);

/// Order of the channels in a [`NormalizedState`], as recorded in checkpoints.
pub const CHANNEL_ORDER: [&str; NORMALIZED_CHANNELS] = [
    "r", "theta", "phi+", "phi-", "v_xy", "v_yaw+", "v_yaw-", "v_z+", "v_z-", "d1", "d2", "d3", "d4",
    "d5", "d6", "d7", "d8", "d9", "d10", "d11", "d12",
];

/// Normalization and velocity-mapping constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecConstants {
    pub r_min: f64,
    pub d_min: f64,
    pub v_xy_max: f64,
    pub v_yaw_max: f64,
    pub v_z_max: f64,
    pub alpha_xy: f64,
    pub alpha_yaw: f64,
    pub alpha_z: f64,
    pub v_min: f64,
}

impl Default for CodecConstants {
    fn default() -> Self {
        Self {
            r_min: 0.3,
            d_min: 0.5,
            v_xy_max: 0.5,
            v_yaw_max: 2.0,
            v_z_max: 0.2,
            alpha_xy: 0.225,
            alpha_yaw: 1.8,
            alpha_z: 0.18,
            v_min: 0.05,
        }
    }
}

/// Raw 18-channel state: goal in local spherical coordinates, current
/// velocity, and pooled depth features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub v_xy: f64,
    pub v_yaw: f64,
    pub v_z: f64,
    pub depth: [f64; DEPTH_FEATURES],
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.r, self.theta, self.phi, self.v_xy, self.v_yaw, self.v_z];
        v.extend_from_slice(&self.depth);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedState(pub [f64; NORMALIZED_CHANNELS]);

impl NormalizedState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action(pub [f64; ACTION_CHANNELS]);

impl Action {
    pub fn clipped(mut self) -> Self {
        for a in &mut self.0 {
            *a = a.clamp(0.0, 1.0);
        }
        self
    }
}

/// Commanded horizontal speed, yaw rate and vertical speed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SettingVelocity {
    pub v_xy: f64,
    pub v_yaw: f64,
    pub v_z: f64,
}

/// Range of valid depth readings in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

impl Default for DepthRange {
    fn default() -> Self {
        Self { min: 0.5, max: 10.0 }
    }
}

impl DepthRange {
    pub fn is_valid(&self, d: f64) -> bool {
        d.is_finite() && d >= self.min && d <= self.max
    }
}

/// Mean of the valid pixels in each patch of a `rows x cols` grid, patches
/// in row-major order. A patch with no valid pixel reads as `range.max`.
pub fn pool_depth(image: &Array2<f64>, grid: (usize, usize), range: DepthRange) -> Result<Vec<f64>> {
    let (h, w) = image.dim();
    let (rows, cols) = grid;
    if h == 0 || w == 0 {
        return Err(Error::config("empty depth image"));
    }
    if rows == 0 || cols == 0 || h % rows != 0 || w % cols != 0 {
        return Err(Error::config(format!(
            "depth image {h}x{w} is not divisible into a {rows}x{cols} grid"
        )));
    }
    let (ph, pw) = (h / rows, w / cols);
    let mut features = Vec::with_capacity(rows * cols);
    for gr in 0..rows {
        for gc in 0..cols {
            let patch = image.slice(ndarray::s![gr * ph..(gr + 1) * ph, gc * pw..(gc + 1) * pw]);
            let (sum, n) = patch
                .iter()
                .filter(|&&d| range.is_valid(d))
                .fold((0.0, 0usize), |(s, n), &d| (s + d, n + 1));
            features.push(if n == 0 { range.max } else { sum / n as f64 });
        }
    }
    Ok(features)
}

fn split(value: f64, scale: f64) -> (f64, f64) {
    let x = (value.abs() / scale).min(1.0);
    if value >= 0.0 {
        (x, 0.0)
    } else {
        (0.0, x)
    }
}

/// Maps an observation to 21 channels in `[0, 1]`, splitting signed
/// quantities into (positive, negative) pairs.
pub fn normalize_state(obs: &Observation, k: &CodecConstants) -> Result<NormalizedState> {
    if !(obs.r > 0.0) {
        return Err(Error::Codec(format!("goal distance must be positive, got {}", obs.r)));
    }
    if let Some(d) = obs.depth.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::Codec(format!("depth features must be positive, got {d}")));
    }
    let mut s = [0.0; NORMALIZED_CHANNELS];
    s[0] = (k.r_min / obs.r).min(1.0);
    s[1] = (obs.theta / std::f64::consts::PI).clamp(0.0, 1.0);
    (s[2], s[3]) = split(obs.phi, std::f64::consts::PI);
    s[4] = (obs.v_xy / k.v_xy_max).clamp(0.0, 1.0);
    (s[5], s[6]) = split(obs.v_yaw, k.v_yaw_max);
    (s[7], s[8]) = split(obs.v_z, k.v_z_max);
    for (dst, d) in s[9..].iter_mut().zip(&obs.depth) {
        *dst = (k.d_min / d).min(1.0);
    }
    Ok(NormalizedState(s))
}

/// Uniform spike encoding: channel `i` fires at step `t` iff `state[i] > u[i][t]`
/// with `u ~ U[0, 1)` drawn fresh, channel-major.
pub fn uniform_encode<R: Rng + ?Sized>(state: &[f64], time_steps: usize, rng: &mut R) -> SpikeArray {
    let mut spikes = SpikeArray::zeros(state.len(), time_steps);
    for (i, &x) in state.iter().enumerate() {
        for t in 0..time_steps {
            let u: f64 = rng.random();
            spikes.set(i, t, x > u);
        }
    }
    spikes
}

/// Firing rate of every channel.
pub fn rate_decode(spikes: &SpikeArray) -> Vec<f64> {
    let t = spikes.time_steps() as f64;
    spikes.counts().into_iter().map(|c| c as f64 / t).collect()
}

/// Rate decoding into a four-channel action.
pub fn decode_action(spikes: &SpikeArray) -> Result<Action> {
    let rates = rate_decode(spikes);
    let arr: [f64; ACTION_CHANNELS] = rates
        .try_into()
        .map_err(|r: Vec<f64>| Error::Codec(format!("expected {ACTION_CHANNELS} action channels, got {}", r.len())))?;
    Ok(Action(arr))
}

pub fn map_velocity(action: &Action, k: &CodecConstants) -> SettingVelocity {
    let a = &action.0;
    SettingVelocity {
        v_xy: k.alpha_xy * (a[0] + a[1]) + k.v_min,
        v_yaw: k.alpha_yaw * (a[1] - a[0]),
        v_z: k.alpha_z * (a[3] - a[2]),
    }
}
