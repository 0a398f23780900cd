//! Two-state leaky integrate-and-fire (TS-LIF) spiking fully-connected network.
//!
//! Every layer `n` keeps a membrane current `C`, a membrane voltage `U` and a
//! binary spike vector `O`, updated for `t = 1..=T` as
//!
//! ```text
//! C[n][t] = dc * C[n][t-1] + W[n] * O[n-1][t] + b[n]
//! U[n][t] = dv * U[n][t-1] * (1 - O[n][t-1]) + C[n][t]
//! O[n][t] = 1 if U[n][t] >= threshold else 0
//! ```
//!
//! with all states zero before `t = 1`. The backward pass walks the unrolled
//! recurrence in reverse, mixing the spatial chain (through `W`) with the
//! temporal chains (through `dv`, `dc` and the reset gate), and replaces the
//! derivative of the spike function with a rectangular surrogate.
//!
//! All passes are batched: a trace holds one row per sample so the matrix
//! products run over the whole batch at once. Single-sample entry points are
//! thin wrappers over a batch of one.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neuron constants shared by every spiking layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronConstants {
    pub decay_current: f64,
    pub decay_voltage: f64,
    pub threshold: f64,
    /// Width `m` of the rectangular surrogate gradient.
    pub surrogate_width: f64,
}

impl Default for NeuronConstants {
    fn default() -> Self {
        Self {
            decay_current: 0.5,
            decay_voltage: 0.75,
            threshold: 0.5,
            surrogate_width: 1.0,
        }
    }
}

/// Parameters of one spiking layer. `weights` is `[out_channels x in_channels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub decay_current: f64,
    pub decay_voltage: f64,
    pub threshold: f64,
}

impl LayerParams {
    pub fn new(
        weights: Array2<f64>,
        biases: Array1<f64>,
        decay_current: f64,
        decay_voltage: f64,
        threshold: f64,
    ) -> Result<Self> {
        let layer = Self {
            weights,
            biases,
            decay_current,
            decay_voltage,
            threshold,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn in_channels(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_channels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.nrows() != self.biases.len() {
            return Err(Error::config(format!(
                "layer has {} weight rows but {} biases",
                self.weights.nrows(),
                self.biases.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.decay_current) || !(0.0..=1.0).contains(&self.decay_voltage)
        {
            return Err(Error::config(format!(
                "decay constants must lie in [0, 1], got current={} voltage={}",
                self.decay_current, self.decay_voltage
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// A whole spiking actor: layers from input to output plus the surrogate width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
    pub surrogate_width: f64,
}

impl NetworkParams {
    pub fn new(layers: Vec<LayerParams>, surrogate_width: f64) -> Result<Self> {
        let net = Self {
            layers,
            surrogate_width,
        };
        net.validate()?;
        Ok(net)
    }

    /// Random network with layer widths `sizes = [in, hidden.., out]`.
    ///
    /// Weights and biases are uniform in `±weight_scale / sqrt(fan_in)`.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        neuron: NeuronConstants,
        weight_scale: f64,
        bias: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = weight_scale / (w[0] as f64).sqrt();
                let weights = Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-bound..=bound));
                let biases = Array1::from_shape_fn(w[1], |_| bias + rng.random_range(-bound..=bound));
                LayerParams {
                    weights,
                    biases,
                    decay_current: neuron.decay_current,
                    decay_voltage: neuron.decay_voltage,
                    threshold: neuron.threshold,
                }
            })
            .collect();
        Self::new(layers, neuron.surrogate_width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("network has no layers"));
        }
        if !(self.surrogate_width > 0.0) {
            return Err(Error::config("surrogate width must be positive"));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        for (n, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_channels() != pair[1].in_channels() {
                return Err(Error::config(format!(
                    "layer {} emits {} channels but layer {} expects {}",
                    n,
                    pair[0].out_channels(),
                    n + 1,
                    pair[1].in_channels()
                )));
            }
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].in_channels()
    }

    pub fn output_channels(&self) -> usize {
        self.layers[self.layers.len() - 1].out_channels()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_channels()];
        sizes.extend(self.layers.iter().map(LayerParams::out_channels));
        sizes
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.biases.len() == b.biases.len())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }
}

/// Binary spike tensor of shape `channels x T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeArray {
    data: Array2<f64>,
}

impl SpikeArray {
    pub fn zeros(channels: usize, time_steps: usize) -> Self {
        Self {
            data: Array2::zeros((channels, time_steps)),
        }
    }

    /// Builds a spike array from `f(channel, t)` with `t` zero-based.
    pub fn from_fn(channels: usize, time_steps: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        Self {
            data: Array2::from_shape_fn((channels, time_steps), |(c, t)| f(c, t) as u8 as f64),
        }
    }

    /// Rows are channels, columns are time steps; every entry must be 0 or 1.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let channels = rows.len();
        let time_steps = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != time_steps) {
            return Err(Error::config("spike rows have unequal lengths"));
        }
        if rows.iter().flatten().any(|&b| b > 1) {
            return Err(Error::config("spike entries must be 0 or 1"));
        }
        Ok(Self::from_fn(channels, time_steps, |c, t| rows[c][t] == 1))
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn time_steps(&self) -> usize {
        self.data.ncols()
    }

    pub fn get(&self, channel: usize, t: usize) -> bool {
        self.data[[channel, t]] != 0.0
    }

    pub fn set(&mut self, channel: usize, t: usize, fired: bool) {
        self.data[[channel, t]] = fired as u8 as f64;
    }

    /// Spikes of every channel at zero-based step `t`.
    pub fn column(&self, t: usize) -> ArrayView1<'_, f64> {
        self.data.column(t)
    }

    /// Number of spikes per channel.
    pub fn counts(&self) -> Vec<usize> {
        self.data
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&x| x != 0.0).count())
            .collect()
    }

    pub fn as_array(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }
}

/// States of one layer over time; each entry is `[batch x out_channels]`.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    pub currents: Vec<Array2<f64>>,
    pub voltages: Vec<Array2<f64>>,
    pub spikes: Vec<Array2<f64>>,
}

/// Everything the backward pass needs from a forward pass.
///
/// Time indices are zero-based: index `t` holds the state after step `t + 1`.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    batch: usize,
    time_steps: usize,
    /// Input spikes per step, `[batch x in_channels]`.
    pub inputs: Vec<Array2<f64>>,
    pub layers: Vec<LayerTrace>,
}

impl ForwardTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn current(&self, sample: usize, layer: usize, t: usize) -> ArrayView1<'_, f64> {
        self.layers[layer].currents[t].row(sample)
    }

    pub fn voltage(&self, sample: usize, layer: usize, t: usize) -> ArrayView1<'_, f64> {
        self.layers[layer].voltages[t].row(sample)
    }

    pub fn spikes(&self, sample: usize, layer: usize, t: usize) -> ArrayView1<'_, f64> {
        self.layers[layer].spikes[t].row(sample)
    }

    /// Output-layer spike train of one sample.
    pub fn output(&self, sample: usize) -> SpikeArray {
        let last = &self.layers[self.layers.len() - 1];
        let channels = last.spikes[0].ncols();
        SpikeArray::from_fn(channels, self.time_steps, |c, t| last.spikes[t][[sample, c]] != 0.0)
    }

    /// Mean output firing rate per sample, `[batch x out_channels]`.
    pub fn output_rates(&self) -> Array2<f64> {
        let last = &self.layers[self.layers.len() - 1];
        let mut sum = Array2::zeros(last.spikes[0].raw_dim());
        for o in &last.spikes {
            sum += o;
        }
        sum / self.time_steps as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub d_weights: Array2<f64>,
    pub d_biases: Array1<f64>,
}

/// Gradients of a scalar loss with respect to every weight and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrads>,
}

impl NetworkGrads {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads {
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

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|g| g.d_weights.iter().chain(g.d_biases.iter()))
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Rectangular surrogate for the spike-function derivative:
/// `(1/m) * 1{|u - threshold| < m/2}`.
#[inline]
pub fn surrogate(voltage: f64, threshold: f64, width: f64) -> f64 {
    if (voltage - threshold).abs() < 0.5 * width {
        1.0 / width
    } else {
        0.0
    }
}

pub fn surrogate_spike_derivative(voltage: &[f64], threshold: f64, width: f64) -> Vec<f64> {
    voltage.iter().map(|&u| surrogate(u, threshold, width)).collect()
}

/// Forward pass of a single spike train.
pub fn san_forward(input: &SpikeArray, params: &NetworkParams) -> Result<(SpikeArray, ForwardTrace)> {
    let trace = san_forward_batch(std::slice::from_ref(input), params)?;
    Ok((trace.output(0), trace))
}

/// Forward pass of a batch of spike trains sharing one `T`.
pub fn san_forward_batch(inputs: &[SpikeArray], params: &NetworkParams) -> Result<ForwardTrace> {
    params.validate()?;
    let batch = inputs.len();
    if batch == 0 {
        return Err(Error::config("empty input batch"));
    }
    let time_steps = inputs[0].time_steps();
    if time_steps == 0 {
        return Err(Error::config("spike arrays need at least one time step"));
    }
    let in_channels = params.input_channels();
    for x in inputs {
        if x.channels() != in_channels {
            return Err(Error::config(format!(
                "input has {} channels, first layer expects {}",
                x.channels(),
                in_channels
            )));
        }
        if x.time_steps() != time_steps {
            return Err(Error::config("inputs in a batch must share T"));
        }
    }

    let step_inputs: Vec<Array2<f64>> = (0..time_steps)
        .map(|t| {
            let mut m = Array2::zeros((batch, in_channels));
            for (row, x) in m.rows_mut().into_iter().zip(inputs) {
                let mut row = row;
                row.assign(&x.column(t));
            }
            m
        })
        .collect();
    Ok(forward_steps(step_inputs, params))
}

fn forward_steps(step_inputs: Vec<Array2<f64>>, params: &NetworkParams) -> ForwardTrace {
    let batch = step_inputs[0].nrows();
    let time_steps = step_inputs.len();
    let mut layers: Vec<LayerTrace> = params
        .layers
        .iter()
        .map(|_| LayerTrace {
            currents: Vec::with_capacity(time_steps),
            voltages: Vec::with_capacity(time_steps),
            spikes: Vec::with_capacity(time_steps),
        })
        .collect();

    for t in 0..time_steps {
        for (n, layer) in params.layers.iter().enumerate() {
            let below = if n == 0 {
                &step_inputs[t]
            } else {
                &layers[n - 1].spikes[t]
            };
            let mut current = below.dot(&layer.weights.t());
            current += &layer.biases;
            let mut voltage = current.clone();
            if t > 0 {
                let lt = &layers[n];
                current.scaled_add(layer.decay_current, &lt.currents[t - 1]);
                voltage.assign(&current);
                let dv = layer.decay_voltage;
                Zip::from(&mut voltage)
                    .and(&lt.voltages[t - 1])
                    .and(&lt.spikes[t - 1])
                    .for_each(|u, &u_prev, &o_prev| *u += dv * u_prev * (1.0 - o_prev));
            }
            let th = layer.threshold;
            let spikes = voltage.mapv(|u| if u >= th { 1.0 } else { 0.0 });
            let lt = &mut layers[n];
            lt.currents.push(current);
            lt.voltages.push(voltage);
            lt.spikes.push(spikes);
        }
    }
    ForwardTrace {
        batch,
        time_steps,
        inputs: step_inputs,
        layers,
    }
}

/// Gradients for a single sample given `dL/da` on the decoded action.
pub fn san_backward(
    trace: &ForwardTrace,
    params: &NetworkParams,
    dl_daction: &[f64],
    time_steps: usize,
) -> Result<NetworkGrads> {
    let seed = Array2::from_shape_vec((1, dl_daction.len()), dl_daction.to_vec())
        .map_err(|e| Error::config(e.to_string()))?;
    san_backward_batch(trace, params, seed.view(), time_steps)
}

/// Spatio-temporal backward pass over a batch, summing gradients over samples.
///
/// `dl_daction` is `[batch x out_channels]`: the derivative of the loss with
/// respect to each sample's rate-decoded action.
pub fn san_backward_batch(
    trace: &ForwardTrace,
    params: &NetworkParams,
    dl_daction: ArrayView2<'_, f64>,
    time_steps: usize,
) -> Result<NetworkGrads> {
    if time_steps != trace.time_steps {
        return Err(Error::config(format!(
            "trace covers T={} but backward was asked for T={}",
            trace.time_steps, time_steps
        )));
    }
    if trace.layers.len() != params.layers.len() {
        return Err(Error::config("trace and parameters have different depths"));
    }
    if dl_daction.dim() != (trace.batch, params.output_channels()) {
        return Err(Error::config(format!(
            "action gradient has shape {:?}, expected ({}, {})",
            dl_daction.dim(),
            trace.batch,
            params.output_channels()
        )));
    }

    let depth = params.layers.len();
    let width = params.surrogate_width;
    // dL/dO at the output, identical for every t: the decoded action averages over time.
    let output_seed = dl_daction.mapv(|g| g / time_steps as f64);

    let mut grads = NetworkGrads::zeros_like(params);
    // dL/dU[n][t+1] and dL/dC[n][t+1]; zero at t = T.
    let mut next_du: Vec<Array2<f64>> = trace.layers.iter().map(|l| Array2::zeros(l.voltages[0].raw_dim())).collect();
    let mut next_dc: Vec<Array2<f64>> = next_du.clone();

    for t in (0..time_steps).rev() {
        let has_future = t + 1 < time_steps;
        // dL/dC[n+1][t] for the layer above, consumed by the spatial hop.
        let mut above_dc: Option<Array2<f64>> = None;
        for n in (0..depth).rev() {
            let layer = &params.layers[n];
            let lt = &trace.layers[n];
            let (u, o) = (&lt.voltages[t], &lt.spikes[t]);

            // Spatial part of dL/dO[n][t].
            let mut d_o = match above_dc.take() {
                None => output_seed.clone(),
                Some(dc_above) => dc_above.dot(&params.layers[n + 1].weights),
            };
            // Temporal part through the reset gate: dU[t+1]/dO[t] = -dv * U[t].
            let dv = layer.decay_voltage;
            if has_future {
                Zip::from(&mut d_o)
                    .and(&next_du[n])
                    .and(u)
                    .for_each(|g, &du_next, &u_t| *g -= du_next * dv * u_t);
            }

            let th = layer.threshold;
            let mut d_u = Array2::zeros(u.raw_dim());
            Zip::from(&mut d_u)
                .and(&d_o)
                .and(u)
                .for_each(|g, &go, &u_t| *g = go * surrogate(u_t, th, width));
            if has_future {
                Zip::from(&mut d_u)
                    .and(&next_du[n])
                    .and(o)
                    .for_each(|g, &du_next, &o_t| *g += du_next * dv * (1.0 - o_t));
            }

            let mut d_c = d_u.clone();
            if has_future {
                d_c.scaled_add(layer.decay_current, &next_dc[n]);
            }

            let below = if n == 0 {
                &trace.inputs[t]
            } else {
                &trace.layers[n - 1].spikes[t]
            };
            let g = &mut grads.layers[n];
            ndarray::linalg::general_mat_mul(1.0, &d_c.t(), below, 1.0, &mut g.d_weights);
            g.d_biases += &d_c.sum_axis(Axis(0));

            next_du[n] = d_u;
            above_dc = Some(d_c.clone());
            next_dc[n] = d_c;
        }
    }
    Ok(grads)
}

/// Splits a batch trace row range into a new trace (used for chunked work).
pub fn slice_trace(trace: &ForwardTrace, start: usize, end: usize) -> ForwardTrace {
    let cut = |m: &Array2<f64>| m.slice(s![start..end, ..]).to_owned();
    ForwardTrace {
        batch: end - start,
        time_steps: trace.time_steps,
        inputs: trace.inputs.iter().map(cut).collect(),
        layers: trace
            .layers
            .iter()
            .map(|l| LayerTrace {
                currents: l.currents.iter().map(cut).collect(),
                voltages: l.voltages.iter().map(cut).collect(),
                spikes: l.spikes.iter().map(cut).collect(),
            })
            .collect(),
    }
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    in_channels: usize,
    out_channels: usize,
    /// Row-major `[out_channels x in_channels]`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    decay_current: f64,
    decay_voltage: f64,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    layers: Vec<LayerRepr>,
    surrogate_width: f64,
}

impl From<NetworkParams> for NetworkRepr {
    fn from(net: NetworkParams) -> Self {
        NetworkRepr {
            surrogate_width: net.surrogate_width,
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerRepr {
                    in_channels: l.in_channels(),
                    out_channels: l.out_channels(),
                    weights: l.weights.iter().copied().collect(),
                    biases: l.biases.to_vec(),
                    decay_current: l.decay_current,
                    decay_voltage: l.decay_voltage,
                    threshold: l.threshold,
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkRepr> for NetworkParams {
    type Error = Error;

    fn try_from(repr: NetworkRepr) -> Result<Self> {
        let layers = repr
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.out_channels, l.in_channels), l.weights)
                    .map_err(|e| Error::config(format!("weights: {e}")))?;
                LayerParams::new(weights, Array1::from(l.biases), l.decay_current, l.decay_voltage, l.threshold)
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkParams::new(layers, repr.surrogate_width)
    }
}
