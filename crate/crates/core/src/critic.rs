//! Deep critic: a rectifier MLP scoring (normalized state, action) pairs.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Action, NormalizedState, ACTION_CHANNELS, NORMALIZED_CHANNELS};
use crate::error::{Error, Result};

pub const CRITIC_INPUT: usize = NORMALIZED_CHANNELS + ACTION_CHANNELS;

/// Fully-connected layer, `weights` is `[out x in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Hidden layers use ReLU; the last layer is linear with a single output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CriticRepr", into = "CriticRepr")]
pub struct CriticParams {
    pub layers: Vec<DenseLayer>,
}

impl CriticParams {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let params = Self { layers };
        params.validate()?;
        Ok(params)
    }

    /// Hidden layers uniform in `±1/sqrt(fan_in)`, output layer in `±3e-3`.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        if sizes.contains(&0) {
            return Err(Error::config(format!("invalid critic sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(n, w)| {
                let bound = if n == last { 3e-3 } else { 1.0 / (w[0] as f64).sqrt() };
                DenseLayer {
                    weights: Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-bound..=bound)),
                    biases: Array1::from_shape_fn(w[1], |_| rng.random_range(-bound..=bound)),
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::config("critic has no layers"));
        };
        for l in &self.layers {
            if l.weights.nrows() != l.biases.len() {
                return Err(Error::config("critic layer rows and biases differ"));
            }
        }
        for pair in self.layers.windows(2) {
            if pair[0].weights.nrows() != pair[1].weights.ncols() {
                return Err(Error::config("critic layer chain is inconsistent"));
            }
        }
        if last.weights.nrows() != 1 {
            return Err(Error::config("critic must produce a single output"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.biases.len() == b.biases.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub d_weights: Array2<f64>,
    pub d_biases: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticGrads {
    pub layers: Vec<DenseGrads>,
}

impl CriticGrads {
    pub fn zeros_like(params: &CriticParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| DenseGrads {
                    d_weights: Array2::zeros(l.weights.raw_dim()),
                    d_biases: Array1::zeros(l.biases.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.d_weights += &b.d_weights;
            a.d_biases += &b.d_biases;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.d_weights *= factor;
            g.d_biases *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.d_weights.iter().chain(g.d_biases.iter()).all(|x| x.is_finite()))
    }
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct CriticTrace {
    /// `[batch x input]`
    pub inputs: Array2<f64>,
    /// Pre-activation of every layer, `[batch x out]`.
    pub pre: Vec<Array2<f64>>,
}

impl CriticTrace {
    pub fn q_values(&self) -> Array1<f64> {
        self.pre[self.pre.len() - 1].column(0).to_owned()
    }
}

/// Concatenates a normalized state and an action into one critic input row.
pub fn critic_input(state: &NormalizedState, action: &Action) -> [f64; CRITIC_INPUT] {
    let mut x = [0.0; CRITIC_INPUT];
    x[..NORMALIZED_CHANNELS].copy_from_slice(&state.0);
    x[NORMALIZED_CHANNELS..].copy_from_slice(&action.0);
    x
}

pub fn critic_forward_batch(inputs: ArrayView2<'_, f64>, params: &CriticParams) -> Result<CriticTrace> {
    if inputs.ncols() != params.input_dim() {
        return Err(Error::config(format!(
            "critic expects {} inputs, got {}",
            params.input_dim(),
            inputs.ncols()
        )));
    }
    let last = params.layers.len() - 1;
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut act = inputs.to_owned();
    for (n, layer) in params.layers.iter().enumerate() {
        let mut z = act.dot(&layer.weights.t());
        z += &layer.biases;
        if n != last {
            act = z.mapv(relu);
        }
        pre.push(z);
    }
    Ok(CriticTrace {
        inputs: inputs.to_owned(),
        pre,
    })
}

pub fn critic_forward(state: &NormalizedState, action: &Action, params: &CriticParams) -> Result<f64> {
    let x = critic_input(state, action);
    let trace = critic_forward_batch(ArrayView2::from_shape((1, CRITIC_INPUT), &x).expect("shape"), params)?;
    Ok(trace.q_values()[0])
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Reverse pass for `sum_i dq_seed[i] * Q_i`.
///
/// Returns parameter gradients (summed over the batch) and the gradient with
/// respect to every input row, `[batch x input]`.
pub fn critic_backward_batch(
    trace: &CriticTrace,
    params: &CriticParams,
    dq_seed: &[f64],
) -> Result<(CriticGrads, Array2<f64>)> {
    let batch = trace.inputs.nrows();
    if dq_seed.len() != batch {
        return Err(Error::config(format!("seed has {} entries for a batch of {batch}", dq_seed.len())));
    }
    let mut grads = CriticGrads::zeros_like(params);
    let mut delta = Array2::from_shape_vec((batch, 1), dq_seed.to_vec()).expect("shape");
    for n in (0..params.layers.len()).rev() {
        let below = if n == 0 {
            trace.inputs.clone()
        } else {
            trace.pre[n - 1].mapv(relu)
        };
        let g = &mut grads.layers[n];
        g.d_weights = delta.t().dot(&below);
        g.d_biases = delta.sum_axis(Axis(0));
        let mut d_below = delta.dot(&params.layers[n].weights);
        if n > 0 {
            ndarray::Zip::from(&mut d_below)
                .and(&trace.pre[n - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
        }
        delta = d_below;
    }
    Ok((grads, delta))
}

/// Gradients of a single `Q` with respect to the parameters and the action.
pub fn critic_backward(trace: &CriticTrace, params: &CriticParams) -> Result<(CriticGrads, [f64; ACTION_CHANNELS])> {
    let (grads, d_in) = critic_backward_batch(trace, params, &[1.0])?;
    let mut da = [0.0; ACTION_CHANNELS];
    for (dst, src) in da.iter_mut().zip(d_in.row(0).iter().skip(NORMALIZED_CHANNELS)) {
        *dst = *src;
    }
    Ok((grads, da))
}

#[derive(Serialize, Deserialize)]
struct DenseRepr {
    in_channels: usize,
    out_channels: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CriticRepr {
    layers: Vec<DenseRepr>,
}

impl From<CriticParams> for CriticRepr {
    fn from(p: CriticParams) -> Self {
        CriticRepr {
            layers: p
                .layers
                .into_iter()
                .map(|l| DenseRepr {
                    in_channels: l.weights.ncols(),
                    out_channels: l.weights.nrows(),
                    weights: l.weights.iter().copied().collect(),
                    biases: l.biases.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<CriticRepr> for CriticParams {
    type Error = Error;

    fn try_from(repr: CriticRepr) -> Result<Self> {
        let layers = repr
            .layers
            .into_iter()
            .map(|l| {
                Ok(DenseLayer {
                    weights: Array2::from_shape_vec((l.out_channels, l.in_channels), l.weights)
                        .map_err(|e| Error::config(format!("critic weights: {e}")))?,
                    biases: Array1::from(l.biases),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CriticParams::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state() -> NormalizedState {
        NormalizedState(std::array::from_fn(|i| (i as f64 * 0.37).fract()))
    }

    #[test]
    fn zero_network_scores_zero() {
        let mut p = CriticParams::init(CRITIC_INPUT, &[8, 8], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for l in &mut p.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
        assert_eq!(critic_forward(&state(), &Action([0.3; 4]), &p).unwrap(), 0.0);
        let x = critic_input(&state(), &Action([0.3; 4]));
        let trace = critic_forward_batch(ArrayView2::from_shape((1, CRITIC_INPUT), &x).unwrap(), &p).unwrap();
        let (g, da) = critic_backward(&trace, &p).unwrap();
        assert_eq!(da, [0.0; 4]);
        // only the output bias sees a gradient
        for (n, l) in g.layers.iter().enumerate() {
            assert!(l.d_weights.iter().all(|&v| v == 0.0));
            let expect = if n == g.layers.len() - 1 { 1.0 } else { 0.0 };
            assert!(l.d_biases.iter().all(|&v| v == expect));
        }
    }

    #[test]
    fn two_unit_toy_network() {
        // inputs (x0, x1) -> h = relu([x0 - x1 + 0.5, 2 x1 - 1]) -> q = 3 h0 - h1 + 0.25
        let p = CriticParams::new(vec![
            DenseLayer {
                weights: array![[1.0, -1.0], [0.0, 2.0]],
                biases: array![0.5, -1.0],
            },
            DenseLayer {
                weights: array![[3.0, -1.0]],
                biases: array![0.25],
            },
        ])
        .unwrap();
        let x = array![[1.0, 0.25], [0.0, 2.0]];
        let trace = critic_forward_batch(x.view(), &p).unwrap();
        // row 0: h = (1.25, 0) -> 4.0; row 1: h = (0, 3) -> -2.75
        assert_eq!(trace.q_values().to_vec(), vec![4.0, -2.75]);
        let (_, d_in) = critic_backward_batch(&trace, &p, &[1.0, 1.0]).unwrap();
        assert_eq!(d_in, array![[3.0, -3.0], [0.0, -2.0]]);
    }

    #[test]
    fn deterministic() {
        let p = CriticParams::init(CRITIC_INPUT, &[16, 16], &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let a = critic_forward(&state(), &Action([0.1, 0.2, 0.3, 0.4]), &p).unwrap();
        let b = critic_forward(&state(), &Action([0.1, 0.2, 0.3, 0.4]), &p).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn output_scaling_scales_action_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = CriticParams::init(CRITIC_INPUT, &[12, 12, 12], &mut rng).unwrap();
        let x = critic_input(&state(), &Action([0.4, 0.6, 0.1, 0.9]));
        let view = ArrayView2::from_shape((1, CRITIC_INPUT), &x).unwrap();
        let (_, da) = critic_backward(&critic_forward_batch(view, &p).unwrap(), &p).unwrap();
        let mut scaled = p.clone();
        let last = scaled.layers.len() - 1;
        scaled.layers[last].weights *= 2.5;
        let (_, db) = critic_backward(&critic_forward_batch(view, &scaled).unwrap(), &scaled).unwrap();
        for (a, b) in da.iter().zip(&db) {
            assert!((b - 2.5 * a).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn serde_round_trip() {
        let p = CriticParams::init(CRITIC_INPUT, &[3], &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let back: CriticParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
