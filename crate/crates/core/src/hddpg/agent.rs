use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::replay::Transition;
use crate::codec::{
    decode_action, map_velocity, normalize_state, uniform_encode, Action, CodecConstants, NormalizedState,
    Observation, SettingVelocity, ACTION_CHANNELS, NORMALIZED_CHANNELS,
};
use crate::critic::{critic_backward_batch, critic_forward_batch, CriticGrads, CriticParams, CRITIC_INPUT};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed::{stream_rng, Stream};
use crate::snn::{san_backward_batch, san_forward, san_forward_batch, NetworkGrads, NetworkParams, SpikeArray};

/// Minibatch rows handled per work item. Fixed so that the reduction order
/// never depends on the execution strategy.
pub const CHUNK: usize = 32;

/// Encodes, runs the actor, decodes and optionally perturbs the action.
///
/// Returns the clipped action (what gets stored for replay) and the
/// velocity command it maps to.
pub fn select_action<R: Rng + ?Sized>(
    obs: &Observation,
    actor: &NetworkParams,
    codec: &CodecConstants,
    time_steps: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<(Action, SettingVelocity)> {
    let state = normalize_state(obs, codec)?;
    let spikes = uniform_encode(state.as_slice(), time_steps, rng);
    let (out, _) = san_forward(&spikes, actor)?;
    let mut action = decode_action(&out)?;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::config(e.to_string()))?;
        for a in action.0.iter_mut() {
            *a += normal.sample(rng);
        }
    }
    let action = action.clipped();
    Ok((action, map_velocity(&action, codec)))
}

/// `y = r + gamma * (1 - done) * q_next`.
pub fn td_target(reward: f64, gamma: f64, q_next: f64, done: bool) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_next
    }
}

fn critic_rows(states: &[NormalizedState], actions: &Array2<f64>) -> Array2<f64> {
    let mut x = Array2::zeros((states.len(), CRITIC_INPUT));
    for (i, st) in states.iter().enumerate() {
        x.slice_mut(s![i, ..NORMALIZED_CHANNELS]).assign(&ndarray::aview1(st.as_slice()));
    }
    x.slice_mut(s![.., NORMALIZED_CHANNELS..]).assign(actions);
    x
}

fn action_rows(actions: impl Iterator<Item = Action>) -> Array2<f64> {
    let flat: Vec<f64> = actions.flat_map(|a| a.0).collect();
    Array2::from_shape_vec((flat.len() / ACTION_CHANNELS, ACTION_CHANNELS), flat).expect("action rows")
}

fn encode_batch(states: &[NormalizedState], time_steps: usize, seed: u64, stream: Stream, offset: usize) -> Vec<SpikeArray> {
    states
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let mut rng = stream_rng(seed, stream, (offset + i) as u64, 0);
            uniform_encode(st.as_slice(), time_steps, &mut rng)
        })
        .collect()
}

/// Spike encodings of the successor states, as fed to the target actor.
pub fn encode_next_states(
    batch: &[Transition],
    codec: &CodecConstants,
    time_steps: usize,
    seed: u64,
) -> Result<Vec<SpikeArray>> {
    let states = batch
        .iter()
        .map(|t| normalize_state(&t.s_next, codec))
        .collect::<Result<Vec<_>>>()?;
    Ok(encode_batch(&states, time_steps, seed, Stream::TargetEncode, 0))
}

/// Spike encodings of the current states, as fed to the actor.
pub fn encode_states(batch: &[Transition], codec: &CodecConstants, time_steps: usize, seed: u64) -> Result<Vec<SpikeArray>> {
    let states = batch
        .iter()
        .map(|t| normalize_state(&t.s, codec))
        .collect::<Result<Vec<_>>>()?;
    Ok(encode_batch(&states, time_steps, seed, Stream::ActorEncode, 0))
}

/// Mean squared TD error and its gradient with respect to the critic.
#[derive(Clone, Debug)]
pub struct TdLoss {
    pub loss: f64,
    pub targets: Vec<f64>,
    pub q: Vec<f64>,
    pub grads: CriticGrads,
}

/// TD loss with explicit next-state spike encodings.
#[allow(clippy::too_many_arguments)]
pub fn td_loss_with_spikes(
    batch: &[Transition],
    next_spikes: &[SpikeArray],
    critic: &CriticParams,
    target_actor: &NetworkParams,
    target_critic: &CriticParams,
    codec: &CodecConstants,
    gamma: f64,
    exec: Execution,
) -> Result<TdLoss> {
    if batch.is_empty() || batch.len() != next_spikes.len() {
        return Err(Error::config("TD batch is empty or mismatched with its encodings"));
    }
    let b = batch.len();
    let chunks: Vec<usize> = (0..b).step_by(CHUNK).collect();
    let parts = exec.map(&chunks, |_, &start| -> Result<(f64, Vec<f64>, Vec<f64>, CriticGrads)> {
        let end = (start + CHUNK).min(b);
        let rows = &batch[start..end];
        let s = rows.iter().map(|t| normalize_state(&t.s, codec)).collect::<Result<Vec<_>>>()?;
        let s_next = rows.iter().map(|t| normalize_state(&t.s_next, codec)).collect::<Result<Vec<_>>>()?;
        let a_next = san_forward_batch(&next_spikes[start..end], target_actor)?.output_rates();
        let q_next = critic_forward_batch(critic_rows(&s_next, &a_next).view(), target_critic)?.q_values();
        let trace = critic_forward_batch(critic_rows(&s, &action_rows(rows.iter().map(|t| t.a))).view(), critic)?;
        let q = trace.q_values();
        let y: Vec<f64> = rows
            .iter()
            .zip(q_next.iter())
            .map(|(t, &qn)| td_target(t.r, gamma, qn, t.done))
            .collect();
        let seed: Vec<f64> = y.iter().zip(q.iter()).map(|(y, q)| -2.0 * (y - q) / b as f64).collect();
        let sq: f64 = y.iter().zip(q.iter()).map(|(y, q)| (y - q) * (y - q)).sum();
        let (grads, _) = critic_backward_batch(&trace, critic, &seed)?;
        Ok((sq, y, q.to_vec(), grads))
    });
    let mut out = TdLoss {
        loss: 0.0,
        targets: Vec::with_capacity(b),
        q: Vec::with_capacity(b),
        grads: CriticGrads::zeros_like(critic),
    };
    for part in parts {
        let (sq, y, q, g) = part?;
        out.loss += sq;
        out.targets.extend(y);
        out.q.extend(q);
        out.grads.add_assign(&g);
    }
    out.loss /= b as f64;
    Ok(out)
}

/// TD loss drawing next-state encodings from the target-encode stream of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn td_loss(
    batch: &[Transition],
    critic: &CriticParams,
    target_actor: &NetworkParams,
    target_critic: &CriticParams,
    codec: &CodecConstants,
    gamma: f64,
    time_steps: usize,
    seed: u64,
    exec: Execution,
) -> Result<TdLoss> {
    let spikes = encode_next_states(batch, codec, time_steps, seed)?;
    td_loss_with_spikes(batch, &spikes, critic, target_actor, target_critic, codec, gamma, exec)
}

/// `-mean Q(s, actor(s))` and its gradient with respect to the actor.
#[derive(Clone, Debug)]
pub struct QLoss {
    pub loss: f64,
    pub grads: NetworkGrads,
}

/// Actor loss with explicit state encodings. The critic is only read.
pub fn q_loss_with_spikes(
    states: &[NormalizedState],
    spikes: &[SpikeArray],
    actor: &NetworkParams,
    critic: &CriticParams,
    exec: Execution,
) -> Result<QLoss> {
    if states.is_empty() || states.len() != spikes.len() {
        return Err(Error::config("actor batch is empty or mismatched with its encodings"));
    }
    let b = states.len();
    let time_steps = spikes[0].time_steps();
    let chunks: Vec<usize> = (0..b).step_by(CHUNK).collect();
    let parts = exec.map(&chunks, |_, &start| -> Result<(f64, NetworkGrads)> {
        let end = (start + CHUNK).min(b);
        let trace = san_forward_batch(&spikes[start..end], actor)?;
        let a = trace.output_rates();
        let ctrace = critic_forward_batch(critic_rows(&states[start..end], &a).view(), critic)?;
        let q_sum: f64 = ctrace.q_values().sum();
        let (_, d_in) = critic_backward_batch(&ctrace, critic, &vec![1.0; end - start])?;
        let dl_da = d_in.slice(s![.., NORMALIZED_CHANNELS..]).mapv(|g| -g / b as f64);
        let grads = san_backward_batch(&trace, actor, dl_da.view(), time_steps)?;
        Ok((-q_sum, grads))
    });
    let mut out = QLoss {
        loss: 0.0,
        grads: NetworkGrads::zeros_like(actor),
    };
    for part in parts {
        let (l, g) = part?;
        out.loss += l;
        out.grads.add_assign(&g);
    }
    out.loss /= b as f64;
    Ok(out)
}

/// Actor loss drawing state encodings from the actor-encode stream of `seed`.
pub fn q_loss(
    batch: &[Transition],
    actor: &NetworkParams,
    critic: &CriticParams,
    codec: &CodecConstants,
    time_steps: usize,
    seed: u64,
    exec: Execution,
) -> Result<QLoss> {
    let states = batch
        .iter()
        .map(|t| normalize_state(&t.s, codec))
        .collect::<Result<Vec<_>>>()?;
    let spikes = encode_batch(&states, time_steps, seed, Stream::ActorEncode, 0);
    q_loss_with_spikes(&states, &spikes, actor, critic, exec)
}
