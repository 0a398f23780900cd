use serde::{Deserialize, Serialize};

use crate::codec::{decode_action, map_velocity, normalize_state, uniform_encode, CodecConstants, Observation, SettingVelocity};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed::{stream_rng, Stream};
use crate::sim::{build_environment, EnvSpec, EpisodeConfig, EpisodeOutcome, Status, Task, TaskSampler, TrajectoryRow, World};
use crate::snn::{san_forward, NetworkParams};

/// Which evaluation world to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EvalWorld {
    Eval1,
    Eval2,
}

impl EvalWorld {
    pub fn build(self, world_seed: u64) -> Result<World> {
        build_environment(&match self {
            EvalWorld::Eval1 => EnvSpec::eval1(world_seed),
            EvalWorld::Eval2 => EnvSpec::eval2(world_seed),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            EvalWorld::Eval1 => "eval1",
            EvalWorld::Eval2 => "eval2",
        }
    }
}

/// The evaluation pairs: a pure function of the world and the protocol seed.
pub fn eval_pairs(world: &World, sampler: &TaskSampler, pairs: usize, seed: u64) -> Result<Vec<Task>> {
    (0..pairs)
        .map(|i| sampler.sample(world, &mut stream_rng(seed, Stream::EvalPairs, world.seed, i as u64)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub pair: usize,
    pub status: Status,
    pub steps: usize,
    pub path_length: f64,
    pub elapsed: f64,
    pub final_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean path length of successful episodes; absent without successes.
    pub average_distance: Option<f64>,
    /// Mean of per-episode average speed over successful episodes.
    pub average_speed: Option<f64>,
    pub collisions: usize,
    pub timeouts: usize,
    pub outcomes: Vec<EpisodeSummary>,
}

impl RepetitionReport {
    pub fn from_outcomes(repetition: usize, outcomes: Vec<EpisodeSummary>) -> Self {
        let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
        let ok: Vec<&EpisodeSummary> = outcomes.iter().filter(|o| o.status == Status::Goal).collect();
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        Self {
            repetition,
            episodes: outcomes.len(),
            successes: ok.len(),
            success_rate: if outcomes.is_empty() { 0.0 } else { ok.len() as f64 / outcomes.len() as f64 },
            average_distance: mean(ok.iter().map(|o| o.path_length).collect()),
            average_speed: mean(
                ok.iter()
                    .filter(|o| o.elapsed > 0.0)
                    .map(|o| o.path_length / o.elapsed)
                    .collect(),
            ),
            collisions: count(Status::Collision),
            timeouts: count(Status::Timeout),
            outcomes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub world: String,
    pub world_seed: u64,
    pub eval_seed: u64,
    pub time_steps: usize,
    pub pairs: usize,
    pub repetitions: Vec<RepetitionReport>,
    pub success_rate_mean: f64,
    pub success_rate_std: f64,
    pub average_distance: Option<f64>,
    pub average_speed: Option<f64>,
}

impl EvalReport {
    pub fn aggregate(world: &str, world_seed: u64, eval_seed: u64, time_steps: usize, pairs: usize, reps: Vec<RepetitionReport>) -> Self {
        let n = reps.len().max(1) as f64;
        let mean = reps.iter().map(|r| r.success_rate).sum::<f64>() / n;
        let var = reps.iter().map(|r| (r.success_rate - mean).powi(2)).sum::<f64>() / n;
        let avg = |f: fn(&RepetitionReport) -> Option<f64>| {
            let xs: Vec<f64> = reps.iter().filter_map(f).collect();
            (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
        };
        Self {
            world: world.to_string(),
            world_seed,
            eval_seed,
            time_steps,
            pairs,
            success_rate_mean: mean,
            success_rate_std: var.sqrt(),
            average_distance: avg(|r| r.average_distance),
            average_speed: avg(|r| r.average_speed),
            repetitions: reps,
        }
    }
}

/// Noise-free spiking policy for evaluation.
pub fn actor_policy<'a>(
    actor: &'a NetworkParams,
    codec: &'a CodecConstants,
    time_steps: usize,
    seed: u64,
    repetition: usize,
    pair: usize,
) -> impl FnMut(&Observation, usize) -> SettingVelocity + 'a {
    let mut rng = stream_rng(seed, Stream::EvalEncode, repetition as u64, pair as u64);
    move |obs, _| {
        let state = normalize_state(obs, codec).expect("simulator observations are valid");
        let spikes = uniform_encode(state.as_slice(), time_steps, &mut rng);
        let (out, _) = san_forward(&spikes, actor).expect("actor shape checked at load");
        map_velocity(&decode_action(&out).expect("actor has four outputs").clipped(), codec)
    }
}

/// One finished evaluation episode.
pub struct EvalEpisode {
    pub repetition: usize,
    pub pair: usize,
    pub outcome: EpisodeOutcome,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Settings of an evaluation sweep.
#[derive(Clone, Copy, Debug)]
pub struct Protocol {
    pub pairs: usize,
    pub repetitions: usize,
    pub eval_seed: u64,
    pub episode: EpisodeConfig,
    pub sampler: TaskSampler,
    pub execution: Execution,
}

/// Runs every (repetition, pair) episode with `make_policy` and aggregates.
pub fn run_protocol<P, F>(world: &World, world_name: &str, time_steps: usize, proto: &Protocol, make_policy: F) -> Result<(EvalReport, Vec<EvalEpisode>)>
where
    P: FnMut(&Observation, usize) -> SettingVelocity,
    F: Fn(usize, usize) -> P + Sync + Send,
{
    if proto.repetitions == 0 || proto.pairs == 0 {
        return Err(Error::config("evaluation needs at least one pair and one repetition"));
    }
    let tasks = eval_pairs(world, &proto.sampler, proto.pairs, proto.eval_seed)?;
    let jobs: Vec<(usize, usize)> = (0..proto.repetitions)
        .flat_map(|r| (0..proto.pairs).map(move |p| (r, p)))
        .collect();
    let done = proto.execution.map(&jobs, |_, &(rep, pair)| -> Result<EvalEpisode> {
        let t = tasks[pair];
        let mut policy = make_policy(rep, pair);
        let (outcome, trajectory) = crate::sim::run_episode(world, t.start, t.yaw, t.goal, &mut policy, proto.episode)?;
        Ok(EvalEpisode {
            repetition: rep,
            pair,
            outcome,
            trajectory,
        })
    });
    let episodes = done.into_iter().collect::<Result<Vec<_>>>()?;
    let reps = (0..proto.repetitions)
        .map(|r| {
            let outs = episodes
                .iter()
                .filter(|e| e.repetition == r)
                .map(|e| EpisodeSummary {
                    pair: e.pair,
                    status: e.outcome.status,
                    steps: e.outcome.steps,
                    path_length: e.outcome.path_length,
                    elapsed: e.outcome.elapsed,
                    final_distance: e.outcome.final_distance,
                })
                .collect();
            RepetitionReport::from_outcomes(r, outs)
        })
        .collect();
    let report = EvalReport::aggregate(world_name, world.seed, proto.eval_seed, time_steps, proto.pairs, reps);
    Ok((report, episodes))
}
