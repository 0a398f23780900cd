//! Flat parameter views, Adam, and target-network blending.

use serde::{Deserialize, Serialize};

use crate::critic::{CriticGrads, CriticParams};
use crate::error::{Error, Result};
use crate::snn::{NetworkGrads, NetworkParams};

/// Access to the trainable tensors of a model (or its gradients) as flat slices,
/// in a fixed order shared by parameters and their gradients.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn shape_signature(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    /// Largest absolute elementwise difference to `other`.
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

macro_rules! impl_parameters {
    ($ty:ty, $w:ident, $b:ident) => {
        impl Parameters for $ty {
            fn tensors(&self) -> Vec<&[f64]> {
                self.layers
                    .iter()
                    .flat_map(|l| {
                        [
                            l.$w.as_slice().expect("standard layout"),
                            l.$b.as_slice().expect("standard layout"),
                        ]
                    })
                    .collect()
            }

            fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
                self.layers
                    .iter_mut()
                    .flat_map(|l| {
                        [
                            l.$w.as_slice_mut().expect("standard layout"),
                            l.$b.as_slice_mut().expect("standard layout"),
                        ]
                    })
                    .collect()
            }
        }
    };
}

impl_parameters!(NetworkParams, weights, biases);
impl_parameters!(CriticParams, weights, biases);
impl_parameters!(NetworkGrads, d_weights, d_biases);
impl_parameters!(CriticGrads, d_weights, d_biases);

/// `target <- eta * conventional + (1 - eta) * target`, elementwise.
pub fn soft_update<P: Parameters>(conventional: &P, target: &mut P, eta: f64) -> Result<()> {
    if conventional.shape_signature() != target.shape_signature() {
        return Err(Error::config("soft update between networks of different shapes"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::config(format!("soft update rate {eta} outside [0, 1]")));
    }
    for (src, dst) in conventional.tensors().into_iter().zip(target.tensors_mut()) {
        for (s, d) in src.iter().zip(dst.iter_mut()) {
            *d = eta * s + (1.0 - eta) * *d;
        }
    }
    Ok(())
}

/// Adaptive moment estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Descends along `grads`.
    pub fn step<P: Parameters, G: Parameters>(&mut self, params: &mut P, grads: &G) -> Result<()> {
        let shape = params.shape_signature();
        if shape != grads.shape_signature() {
            return Err(Error::config("gradient shape does not match parameters"));
        }
        if self.m.is_empty() {
            self.m = shape.iter().map(|&n| vec![0.0; n]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
