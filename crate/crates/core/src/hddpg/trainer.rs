use serde::{Deserialize, Serialize};

use super::agent::{q_loss, select_action, td_loss};
use super::config::TrainConfig;
use super::replay::{ReplayBuffer, Transition};
use crate::checkpoint::{Checkpoint, Progress};
use crate::codec::NORMALIZED_CHANNELS;
use crate::critic::{CriticParams, CRITIC_INPUT};
use crate::error::{Error, Result};
use crate::optim::{soft_update, Adam};
use crate::seed::{derive_seed, stream_rng, Stream};
use crate::sim::{build_environment, EnvSpec, Episode, Status, World};
use crate::snn::NetworkParams;
use crate::codec::ACTION_CHANNELS;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// One-based episode number across the whole run.
    pub episode: usize,
    pub environment: usize,
    pub seed: u64,
    pub steps: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub status: Status,
    pub noise_std: f64,
    pub global_step: u64,
    pub updates: u64,
    /// Mean TD loss over the updates made during the episode.
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub final_distance: f64,
}

/// Conventional and target networks with their optimizers.
#[derive(Clone, Debug)]
pub struct Networks {
    pub actor: NetworkParams,
    pub critic: CriticParams,
    pub target_actor: NetworkParams,
    pub target_critic: CriticParams,
}

impl Networks {
    /// Fresh networks; targets start as exact copies.
    pub fn init(cfg: &TrainConfig, seed: u64) -> Result<Self> {
        let mut sizes = vec![NORMALIZED_CHANNELS];
        sizes.extend(&cfg.actor_hidden);
        sizes.push(ACTION_CHANNELS);
        let mut actor = NetworkParams::init(
            &sizes,
            cfg.neuron,
            cfg.actor_init_scale,
            cfg.actor_init_bias,
            &mut stream_rng(seed, Stream::ActorInit, 0, 0),
        )?;
        let out = actor.layers.last_mut().expect("at least one layer");
        out.weights.mapv_inplace(|w| w * cfg.actor_output_gain);
        out.biases
            .mapv_inplace(|b| cfg.actor_output_bias + (b - cfg.actor_init_bias) * cfg.actor_output_gain);
        let critic = CriticParams::init(CRITIC_INPUT, &cfg.critic_hidden, &mut stream_rng(seed, Stream::CriticInit, 0, 0))?;
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }
}

/// The training environments named by a curriculum, in order.
pub fn curriculum_worlds(cfg: &TrainConfig) -> Result<Vec<World>> {
    (1..=cfg.curriculum_episodes.len())
        .map(|i| build_environment(&EnvSpec::training(i, cfg.world_seed)?))
        .collect()
}

/// Hybrid actor-critic training loop.
pub struct Trainer {
    cfg: TrainConfig,
    seed: u64,
    nets: Networks,
    actor_opt: Adam,
    critic_opt: Adam,
    buffer: ReplayBuffer,
    worlds: Vec<World>,
    episodes_done: usize,
    global_step: u64,
    updates: u64,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let nets = Networks::init(&cfg, seed)?;
        Self::assemble(cfg, seed, nets, Progress::default())
    }

    /// Continues from a checkpoint with the configuration stored in it.
    /// Optimizer moments and the replay buffer are not persisted, so both
    /// start empty.
    pub fn resume(ckpt: Checkpoint) -> Result<Self> {
        let cfg = ckpt.config.clone();
        Self::resume_with(ckpt, cfg)
    }

    /// Continues from a checkpoint under a (possibly extended) configuration.
    /// Network shapes and time steps must agree with the checkpoint.
    pub fn resume_with(ckpt: Checkpoint, cfg: TrainConfig) -> Result<Self> {
        ckpt.validate()?;
        cfg.validate()?;
        ckpt.require_time_steps(cfg.time_steps)?;
        let fresh = Networks::init(&cfg, 0)?;
        if !fresh.actor.same_shape(&ckpt.actor) || !fresh.critic.same_shape(&ckpt.critic) {
            return Err(Error::config("configured network sizes differ from the checkpoint"));
        }
        let Checkpoint {
            actor,
            critic,
            target_actor,
            target_critic,
            progress,
            ..
        } = ckpt;
        let nets = Networks {
            actor,
            critic,
            target_actor,
            target_critic,
        };
        Self::assemble(cfg, progress.seed, nets, progress)
    }

    fn assemble(cfg: TrainConfig, seed: u64, nets: Networks, progress: Progress) -> Result<Self> {
        Ok(Self {
            actor_opt: Adam::new(cfg.lr_actor),
            critic_opt: Adam::new(cfg.lr_critic),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            worlds: curriculum_worlds(&cfg)?,
            seed,
            nets,
            episodes_done: progress.episodes_done,
            global_step: progress.global_step,
            updates: progress.updates,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn networks(&self) -> &Networks {
        &self.nets
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn is_finished(&self) -> bool {
        self.episodes_done >= self.cfg.total_episodes()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            &self.cfg,
            self.nets.clone(),
            Progress {
                seed: self.seed,
                episodes_done: self.episodes_done,
                global_step: self.global_step,
                updates: self.updates,
            },
        )
    }

    /// One optimizer step for the critic, then the actor, then the
    /// targets when due. Returns `(td_loss, actor_loss)`.
    pub fn update(&mut self) -> Result<(f64, f64)> {
        let cfg = &self.cfg;
        let mut rng = stream_rng(self.seed, Stream::Sample, self.updates, 0);
        let batch: Vec<Transition> = self
            .buffer
            .sample_indices(cfg.batch_size, &mut rng)
            .into_iter()
            .map(|i| *self.buffer.get(i).expect("sampled index"))
            .collect();
        let batch_seed = derive_seed(self.seed, Stream::Sample, self.updates, 1);
        let nan = |what: &str| Error::NonFinite {
            what: what.to_string(),
            episode: self.episodes_done + 1,
            step: self.global_step as usize,
        };

        let td = td_loss(
            &batch,
            &self.nets.critic,
            &self.nets.target_actor,
            &self.nets.target_critic,
            &cfg.codec,
            cfg.gamma,
            cfg.time_steps,
            batch_seed,
            cfg.execution,
        )?;
        if !td.loss.is_finite() || !td.grads.is_finite() {
            return Err(nan("critic loss or gradient"));
        }
        self.critic_opt.step(&mut self.nets.critic, &td.grads)?;

        let ql = q_loss(
            &batch,
            &self.nets.actor,
            &self.nets.critic,
            &cfg.codec,
            cfg.time_steps,
            batch_seed,
            cfg.execution,
        )?;
        if !ql.loss.is_finite() || !ql.grads.is_finite() {
            return Err(nan("actor loss or gradient"));
        }
        self.actor_opt.step(&mut self.nets.actor, &ql.grads)?;

        self.updates += 1;
        if self.updates % cfg.target_update_interval as u64 == 0 {
            soft_update(&self.nets.actor, &mut self.nets.target_actor, cfg.soft_update_rate)?;
            soft_update(&self.nets.critic, &mut self.nets.target_critic, cfg.soft_update_rate)?;
        }
        Ok((td.loss, ql.loss))
    }

    /// Runs the next curriculum episode, updating after every step once
    /// the buffer holds a full batch.
    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        if self.is_finished() {
            return Err(Error::config("curriculum already complete"));
        }
        let index = self.episodes_done;
        let environment = self.cfg.environment_for(index);
        let noise_std = self.cfg.noise_std(index);
        let episode_seed = derive_seed(self.seed, Stream::EpisodeSetup, index as u64, 0);
        let world = self.worlds[environment - 1].clone();
        let task = self.cfg.task.sample(&world, &mut stream_rng(self.seed, Stream::EpisodeSetup, index as u64, 0))?;
        let mut ep = Episode::new(&world, task.start, task.yaw, task.goal, self.cfg.episode)?;
        let mut act_rng = stream_rng(self.seed, Stream::Act, index as u64, 0);

        let (mut ret, mut critic_sum, mut actor_sum, mut n_updates) = (0.0, 0.0, 0.0, 0usize);
        let mut obs = ep.observe();
        while !ep.is_done() {
            let (action, cmd) = select_action(
                &obs,
                &self.nets.actor,
                &self.cfg.codec,
                self.cfg.time_steps,
                noise_std,
                &mut act_rng,
            )?;
            let res = ep.step(cmd)?;
            let next = ep.observe();
            self.buffer.push(Transition {
                s: obs,
                a: action,
                r: res.reward,
                s_next: next,
                done: res.done,
            });
            ret += res.reward;
            obs = next;
            self.global_step += 1;
            if self.buffer.len() >= self.cfg.batch_size {
                for _ in 0..self.cfg.updates_per_step {
                    let (c, a) = self.update()?;
                    critic_sum += c;
                    actor_sum += a;
                    n_updates += 1;
                }
            }
        }
        let outcome = ep.outcome().expect("finished episode");
        self.episodes_done += 1;
        let mean = |s: f64| (n_updates > 0).then(|| s / n_updates as f64);
        Ok(EpisodeRecord {
            episode: self.episodes_done,
            environment,
            seed: episode_seed,
            steps: outcome.steps,
            episode_return: ret,
            status: outcome.status,
            noise_std,
            global_step: self.global_step,
            updates: self.updates,
            critic_loss: mean(critic_sum),
            actor_loss: mean(actor_sum),
            final_distance: outcome.final_distance,
        })
    }

    /// Runs the remaining curriculum, handing each record to `on_episode`.
    pub fn train(&mut self, mut on_episode: impl FnMut(&EpisodeRecord, &Self) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let rec = self.run_episode()?;
            on_episode(&rec, self)?;
        }
        Ok(())
    }
}
