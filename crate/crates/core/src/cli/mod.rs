//! Command-line front end: `train`, `evaluate`, `report` and `replay`.

mod config;
mod eval;
mod report;

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::RunConfig;
pub use eval::{
    actor_policy, eval_pairs, run_protocol, EpisodeSummary, EvalEpisode, EvalReport, EvalWorld, Protocol,
    RepetitionReport,
};
pub use report::{find_eval_reports, read_train_log, sliding_average, write_report, ReportFiles, SLIDING_WINDOW};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::hddpg::Trainer;
use crate::sim::TrajectoryRow;

#[derive(Debug, Parser)]
#[command(name = "neuroplanner", version, about = "Spiking actor-critic MAV planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train across the curriculum and write logs and checkpoints.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        time_steps: Option<usize>,
    },
    /// Run the evaluation protocol for a checkpoint in one world.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        world: EvalWorld,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        pairs: Option<usize>,
        /// Evaluation seed (overrides `eval_seed`).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        time_steps: Option<usize>,
        /// Output directory; defaults to `<output_dir>/<world>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot-ready CSV series for a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Print summary statistics of a trajectory CSV.
    Replay {
        #[arg(long)]
        trajectory: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Wall-clock facts about a command, kept apart from deterministic outputs.
#[derive(Serialize)]
struct RunMeta {
    command: &'static str,
    started_unix: f64,
    finished_unix: f64,
    wall_seconds: f64,
    episodes_run: usize,
    parallel: bool,
}

#[derive(Serialize)]
struct FailureDump<'a> {
    error: String,
    checkpoint: &'a Checkpoint,
}

/// Settings for [`train`].
#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub config: RunConfig,
    pub resume: Option<PathBuf>,
    /// On resume, train under `config` rather than the checkpoint's own settings.
    pub override_config: bool,
}

/// Runs (or resumes) training; returns the final checkpoint path.
pub fn train(args: TrainArgs) -> Result<PathBuf> {
    let started = (Instant::now(), unix_seconds());
    let TrainArgs {
        config,
        resume,
        override_config,
    } = args;
    let mut trainer = match &resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if override_config {
                Trainer::resume_with(ckpt, config.train.clone())?
            } else {
                Trainer::resume(ckpt)?
            }
        }
        None => Trainer::new(config.train.clone(), config.seed)?,
    };
    let out = config.output_dir.clone();
    create_dir(&out)?;
    let ckpt_dir = out.join("checkpoints");
    let effective = RunConfig {
        train: trainer.config().clone(),
        ..config
    };
    write_file(&out.join("run_config.json"), &effective.to_json()?)?;

    let log_path = out.join("train_log.jsonl");
    let mut log = if resume.is_some() {
        OpenOptions::new().create(true).append(true).open(&log_path)
    } else {
        File::create(&log_path)
    }
    .map_err(|e| Error::io(&log_path, e))?;

    let first = trainer.episodes_done();
    let every = trainer.config().checkpoint_every;
    let result = trainer.train(|rec, t| {
        let line = serde_json::to_string(rec)?;
        writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;
        if every > 0 && rec.episode % every == 0 {
            create_dir(&ckpt_dir)?;
            t.checkpoint().save(&ckpt_dir.join(format!("episode_{:05}.json", rec.episode)))?;
        }
        Ok(())
    });
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    if let Err(e) = result {
        let dump = FailureDump {
            error: e.to_string(),
            checkpoint: &trainer.checkpoint(),
        };
        write_file(&out.join("failure_dump.json"), &serde_json::to_string(&dump)?)?;
        return Err(e);
    }
    let final_path = out.join("checkpoint.json");
    trainer.checkpoint().save(&final_path)?;
    let meta = RunMeta {
        command: "train",
        started_unix: started.1,
        finished_unix: unix_seconds(),
        wall_seconds: started.0.elapsed().as_secs_f64(),
        episodes_run: trainer.episodes_done() - first,
        parallel: trainer.config().execution.is_parallel(),
    };
    write_file(&out.join("run_meta.json"), &serde_json::to_string_pretty(&meta)?)?;
    Ok(final_path)
}

/// Settings for [`evaluate`].
#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub config: RunConfig,
    pub checkpoint: PathBuf,
    pub world: EvalWorld,
    pub repetitions: usize,
    /// Requested time steps; must match the checkpoint when given.
    pub time_steps: Option<usize>,
    pub out: PathBuf,
}

/// Runs the evaluation protocol and writes `report.json` plus trajectories.
pub fn evaluate(args: EvaluateArgs) -> Result<EvalReport> {
    let started = (Instant::now(), unix_seconds());
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let time_steps = args.time_steps.unwrap_or(ckpt.time_steps);
    ckpt.require_time_steps(time_steps)?;
    let world = args.world.build(ckpt.config.world_seed)?;
    let proto = Protocol {
        pairs: args.config.eval_pairs,
        repetitions: args.repetitions,
        eval_seed: args.config.eval_seed,
        episode: ckpt.config.episode,
        sampler: ckpt.config.task,
        execution: args.config.train.execution,
    };
    let (report, episodes) = run_protocol(&world, args.world.name(), time_steps, &proto, |rep, pair| {
        actor_policy(&ckpt.actor, &ckpt.codec, time_steps, proto.eval_seed, rep, pair)
    })?;

    let traj_dir = args.out.join("trajectories");
    create_dir(&traj_dir)?;
    for ep in &episodes {
        let path = traj_dir.join(format!("rep{}_pair{:03}.csv", ep.repetition, ep.pair));
        let mut w = csv::Writer::from_path(&path)?;
        for row in &ep.trajectory {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    write_file(&args.out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    let meta = RunMeta {
        command: "evaluate",
        started_unix: started.1,
        finished_unix: unix_seconds(),
        wall_seconds: started.0.elapsed().as_secs_f64(),
        episodes_run: episodes.len(),
        parallel: proto.execution.is_parallel(),
    };
    write_file(&args.out.join("run_meta.json"), &serde_json::to_string_pretty(&meta)?)?;
    Ok(report)
}

/// Summary statistics of one exported trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub steps: usize,
    pub duration: f64,
    pub path_length: f64,
    pub average_speed: Option<f64>,
    pub total_reward: f64,
    pub final_distance: f64,
    pub min_altitude: f64,
    pub max_altitude: f64,
}

pub fn trajectory_stats(path: &Path) -> Result<TrajectoryStats> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<TrajectoryRow>, _>>()?;
    let last = rows
        .last()
        .ok_or_else(|| Error::config(format!("{} holds no trajectory rows", path.display())))?;
    let path_length: f64 = rows
        .windows(2)
        .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2) + (w[1].z - w[0].z).powi(2)).sqrt())
        .sum();
    let duration = last.t_sim - rows[0].t_sim;
    Ok(TrajectoryStats {
        steps: last.step,
        duration,
        path_length,
        average_speed: (duration > 0.0).then(|| path_length / duration),
        total_reward: rows.iter().map(|r| r.reward).sum(),
        final_distance: last.d_goal,
        min_altitude: rows.iter().map(|r| r.z).fold(f64::INFINITY, f64::min),
        max_altitude: rows.iter().map(|r| r.z).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            resume,
            out,
            time_steps,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(t) = time_steps {
                cfg.train.time_steps = t;
            }
            cfg.train.validate()?;
            let override_config = config.is_some() || time_steps.is_some();
            let path = train(TrainArgs {
                config: cfg,
                resume,
                override_config,
            })?;
            println!("checkpoint written to {}", path.display());
        }
        Command::Evaluate {
            config,
            checkpoint,
            world,
            reps,
            pairs,
            seed,
            time_steps,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(p) = pairs {
                cfg.eval_pairs = p;
            }
            if let Some(s) = seed {
                cfg.eval_seed = s;
            }
            let time_steps = time_steps.or(config.is_some().then_some(cfg.train.time_steps));
            let out = out.unwrap_or_else(|| cfg.output_dir.join(world.name()));
            let report = evaluate(EvaluateArgs {
                config: cfg,
                checkpoint,
                world,
                repetitions: reps,
                time_steps,
                out: out.clone(),
            })?;
            println!("world      success  avg distance  avg speed");
            for r in &report.repetitions {
                println!(
                    "{:<6} #{} {:>7.2}  {:>12}  {:>9}",
                    report.world,
                    r.repetition,
                    r.success_rate,
                    r.average_distance.map_or("absent".into(), |d| format!("{d:.2} m")),
                    r.average_speed.map_or("absent".into(), |v| format!("{v:.3} m/s")),
                );
            }
            println!(
                "mean success {:.3} +/- {:.3}; report in {}",
                report.success_rate_mean,
                report.success_rate_std,
                out.display()
            );
        }
        Command::Report { run } => {
            let files = write_report(&run)?;
            for p in [files.reward_series, files.success_bars, files.metrics].into_iter().flatten() {
                println!("wrote {}", p.display());
            }
        }
        Command::Replay { trajectory } => {
            let s = trajectory_stats(&trajectory)?;
            println!("steps          {}", s.steps);
            println!("duration       {:.2} s", s.duration);
            println!("path length    {:.3} m", s.path_length);
            match s.average_speed {
                Some(v) => println!("average speed  {v:.3} m/s"),
                None => println!("average speed  absent"),
            }
            println!("total reward   {:.3}", s.total_reward);
            println!("final distance {:.3} m", s.final_distance);
            println!("altitude       {:.2} .. {:.2} m", s.min_altitude, s.max_altitude);
        }
    }
    Ok(())
}
