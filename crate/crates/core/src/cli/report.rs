use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::eval::EvalReport;
use crate::error::{Error, Result};
use crate::hddpg::EpisodeRecord;

pub const SLIDING_WINDOW: usize = 10;

/// Trailing mean over at most `window` values ending at each index.
pub fn sliding_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn read_train_log(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(records)
}

#[derive(Serialize)]
struct RewardRow {
    episode: usize,
    environment: usize,
    episode_return: f64,
    sliding_average: f64,
    success: bool,
}

#[derive(Serialize)]
struct SuccessRow<'a> {
    world: &'a str,
    repetition: usize,
    success_rate: f64,
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    world: &'a str,
    time_steps: usize,
    success_rate_mean: f64,
    success_rate_std: f64,
    average_distance: String,
    average_speed: String,
}

fn absent(x: Option<f64>) -> String {
    x.map_or_else(|| "absent".to_string(), |v| format!("{v}"))
}

/// Files written by [`write_report`].
#[derive(Debug, Default)]
pub struct ReportFiles {
    pub reward_series: Option<PathBuf>,
    pub success_bars: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

/// Every `report.json` directly inside `dir` or one level below.
pub fn find_eval_reports(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let direct = dir.join("report.json");
    if direct.is_file() {
        found.push(direct);
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    found.extend(subdirs.into_iter().map(|d| d.join("report.json")).filter(|p| p.is_file()));
    Ok(found)
}

/// Writes plot-ready CSVs for a run directory.
pub fn write_report(run: &Path) -> Result<ReportFiles> {
    if !run.is_dir() {
        return Err(Error::config(format!("run directory {} does not exist", run.display())));
    }
    let mut files = ReportFiles::default();
    let log = run.join("train_log.jsonl");
    if log.is_file() {
        let records = read_train_log(&log)?;
        let returns: Vec<f64> = records.iter().map(|r| r.episode_return).collect();
        let avg = sliding_average(&returns, SLIDING_WINDOW);
        let path = run.join("reward_series.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for (r, a) in records.iter().zip(avg) {
            w.serialize(RewardRow {
                episode: r.episode,
                environment: r.environment,
                episode_return: r.episode_return,
                sliding_average: a,
                success: r.status == crate::sim::Status::Goal,
            })?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        files.reward_series = Some(path);
    }
    let reports = find_eval_reports(run)?;
    if !reports.is_empty() {
        let parsed = reports
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Ok(serde_json::from_str::<EvalReport>(&text)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let bars = run.join("success_bars.csv");
        let mut w = csv::Writer::from_path(&bars)?;
        for rep in &parsed {
            for r in &rep.repetitions {
                w.serialize(SuccessRow {
                    world: &rep.world,
                    repetition: r.repetition,
                    success_rate: r.success_rate,
                })?;
            }
        }
        w.flush().map_err(|e| Error::io(&bars, e))?;
        let metrics = run.join("metrics.csv");
        let mut w = csv::Writer::from_path(&metrics)?;
        for rep in &parsed {
            w.serialize(MetricsRow {
                world: &rep.world,
                time_steps: rep.time_steps,
                success_rate_mean: rep.success_rate_mean,
                success_rate_std: rep.success_rate_std,
                average_distance: absent(rep.average_distance),
                average_speed: absent(rep.average_speed),
            })?;
        }
        w.flush().map_err(|e| Error::io(&metrics, e))?;
        files.success_bars = Some(bars);
        files.metrics = Some(metrics);
    }
    if files.reward_series.is_none() && files.metrics.is_none() {
        return Err(Error::config(format!(
            "{} holds neither train_log.jsonl nor any report.json",
            run.display()
        )));
    }
    Ok(files)
}
