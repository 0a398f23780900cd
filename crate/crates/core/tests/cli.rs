use std::path::Path;
use std::process::Command;

use neuroplanner::checkpoint::Checkpoint;
use neuroplanner::cli::{
    evaluate, read_train_log, run_protocol, sliding_average, train, trajectory_stats, write_report, EvalWorld,
    EvaluateArgs, Protocol, RunConfig, TrainArgs,
};
use neuroplanner::codec::SettingVelocity;
use neuroplanner::hddpg::TrainConfig;
use neuroplanner::sim::{build_environment, EnvSpec, EpisodeConfig, TaskSampler};
use neuroplanner::Execution;

fn tiny(out: &Path, episodes: usize) -> RunConfig {
    let mut train = TrainConfig {
        batch_size: 8,
        actor_hidden: vec![16],
        critic_hidden: vec![16],
        curriculum_episodes: vec![episodes],
        lr_actor: 1e-3,
        lr_critic: 1e-3,
        ..TrainConfig::default()
    };
    train.episode.max_steps = 40;
    RunConfig {
        seed: 4,
        output_dir: out.to_path_buf(),
        eval_pairs: 10,
        train,
        ..RunConfig::default()
    }
}

fn fresh(config: RunConfig) -> TrainArgs {
    TrainArgs {
        config,
        resume: None,
        override_config: false,
    }
}

#[test]
fn train_writes_loadable_checkpoint_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(fresh(tiny(dir.path(), 3))).unwrap();
    let loaded = Checkpoint::load(&ckpt).unwrap();
    assert_eq!(loaded.progress.episodes_done, 3);
    let log = read_train_log(&dir.path().join("train_log.jsonl")).unwrap();
    assert_eq!(log.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert!(dir.path().join("run_meta.json").is_file());
}

#[test]
fn resume_continues_numbering() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(fresh(tiny(dir.path(), 2))).unwrap();
    let more = TrainArgs {
        config: tiny(dir.path(), 4),
        resume: Some(ckpt),
        override_config: true,
    };
    train(more).unwrap();
    let log = read_train_log(&dir.path().join("train_log.jsonl")).unwrap();
    assert_eq!(log.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
}

#[test]
fn resume_rejects_other_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(fresh(tiny(dir.path(), 1))).unwrap();
    let mut cfg = tiny(dir.path(), 2);
    cfg.train.actor_hidden = vec![32];
    let err = train(TrainArgs {
        config: cfg,
        resume: Some(ckpt),
        override_config: true,
    });
    assert!(err.is_err());
}

#[test]
fn zero_time_steps_rejected_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_neuroplanner"))
        .args(["train", "--time-steps", "0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("time_steps"));
    assert!(!out.join("train_log.jsonl").exists());
}

#[test]
fn evaluation_is_reproducible_and_checks_time_steps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 1);
    let ckpt = train(fresh(cfg.clone())).unwrap();
    let args = |out: &str, t: Option<usize>| EvaluateArgs {
        config: cfg.clone(),
        checkpoint: ckpt.clone(),
        world: EvalWorld::Eval1,
        repetitions: 2,
        time_steps: t,
        out: dir.path().join(out),
    };
    let a = evaluate(args("a", None)).unwrap();
    let b = evaluate(args("b", Some(5))).unwrap();
    assert_eq!(a, b);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("report.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    for rep in &a.repetitions {
        assert_eq!(rep.episodes, 10);
        assert!((0.0..=1.0).contains(&rep.success_rate));
    }
    assert_eq!(std::fs::read_dir(dir.path().join("a/trajectories")).unwrap().count(), 20);
    assert!(evaluate(args("c", Some(10))).is_err());
}

#[test]
fn scripted_policy_clears_every_empty_world_pair() {
    let world = build_environment(&EnvSpec::training(1, 0).unwrap()).unwrap();
    let proto = Protocol {
        pairs: 100,
        repetitions: 3,
        eval_seed: 1,
        episode: EpisodeConfig::default(),
        sampler: TaskSampler::default(),
        execution: Execution::Parallel,
    };
    let (report, episodes) = run_protocol(&world, "env1", 5, &proto, |_, _| {
        |obs: &neuroplanner::codec::Observation, _: usize| SettingVelocity {
            v_xy: if obs.phi.abs() < 0.2 { 0.5 } else { 0.05 },
            v_yaw: (2.0 * obs.phi).clamp(-1.8, 1.8),
            v_z: (-(obs.theta - std::f64::consts::FRAC_PI_2) * 0.6).clamp(-0.18, 0.18),
        }
    })
    .unwrap();
    assert_eq!(episodes.len(), 300);
    for rep in &report.repetitions {
        assert_eq!(rep.episodes, 100);
        assert_eq!(rep.success_rate, 1.0);
        assert!(rep.average_distance.unwrap() > 0.0);
    }
}

#[test]
fn report_and_replay_from_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 3);
    let ckpt = train(fresh(cfg.clone())).unwrap();
    evaluate(EvaluateArgs {
        config: cfg,
        checkpoint: ckpt,
        world: EvalWorld::Eval2,
        repetitions: 1,
        time_steps: None,
        out: dir.path().join("eval2"),
    })
    .unwrap();
    let files = write_report(dir.path()).unwrap();
    let series = std::fs::read_to_string(files.reward_series.unwrap()).unwrap();
    assert_eq!(series.lines().count(), 4);
    let metrics = std::fs::read_to_string(files.metrics.unwrap()).unwrap();
    assert!(metrics.contains("eval2"));

    let traj = dir.path().join("eval2/trajectories/rep0_pair000.csv");
    let stats = trajectory_stats(&traj).unwrap();
    assert!(stats.steps >= 1 && stats.path_length >= 0.0);
    let out = Command::new(env!("CARGO_BIN_EXE_neuroplanner"))
        .args(["replay", "--trajectory"])
        .arg(&traj)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("path length"));
}

#[test]
fn report_without_logs_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(write_report(dir.path()).is_err());
    assert!(write_report(&dir.path().join("missing")).is_err());
}

#[test]
fn config_file_drives_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(&dir.path().join("run"), 2);
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_neuroplanner"))
        .args(["train", "--config"])
        .arg(&path)
        .args(["--seed", "9"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = read_train_log(&dir.path().join("run/train_log.jsonl")).unwrap();
    assert_eq!(log.len(), 2);
    let series = sliding_average(&log.iter().map(|r| r.episode_return).collect::<Vec<_>>(), 10);
    assert_eq!(series[0], log[0].episode_return);
}
