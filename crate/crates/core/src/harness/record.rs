//! Run directory layout and (de)serialization.
//!
//! A single-seed run directory holds `record.csv`, `timing.csv`,
//! `summary.json`, `references.json`, `config.resolved` and `actor.ckpt`.
//! A multi-seed directory holds one `seed-<n>/` run per seed plus an
//! aggregate `summary.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::{iqm, mean, optimality_gap, stratified_bootstrap_ci};
use super::train::{RunRecord, TrainOutcome};
use crate::approx::Checkpoint;
use crate::error::{Error, Result};

pub const RECORD_HEADER: &str = "step,seed,raw_mean,normalized,guide_calls,updates";
pub const BOOTSTRAP_RESAMPLES: usize = 2000;
pub const BOOTSTRAP_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub env: String,
    pub seed: u64,
    pub env_steps: u64,
    pub final_raw: f64,
    pub final_normalized: f64,
    pub random_ref: f64,
    pub expert_ref: f64,
    pub guide_calls: u64,
    pub updates: u64,
    pub episodes: u64,
    pub clamped_log_probs: u64,
    pub floored_guides: u64,
}

impl RunSummary {
    pub fn from_record(r: &RunRecord) -> Self {
        let last = r.final_row();
        Self {
            label: r.label.clone(),
            env: r.env.clone(),
            seed: r.seed,
            env_steps: r.env_steps,
            final_raw: last.raw_mean,
            final_normalized: last.normalized,
            random_ref: r.references.random,
            expert_ref: r.references.expert,
            guide_calls: r.guide_calls,
            updates: r.updates,
            episodes: r.episodes,
            clamped_log_probs: r.clamped,
            floored_guides: r.floored,
        }
    }
}

/// Aggregate of the final normalized scores of a group of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: String,
    pub runs: usize,
    /// Final normalized scores keyed by environment, in seed order.
    pub scores: BTreeMap<String, Vec<f64>>,
    pub mean: f64,
    pub iqm: f64,
    pub optimality_gap: f64,
    /// 95% stratified bootstrap intervals; absent with fewer than two seeds
    /// in some environment.
    pub iqm_ci: Option<(f64, f64)>,
    pub optimality_gap_ci: Option<(f64, f64)>,
}

pub fn aggregate(label: &str, runs: &[RunSummary]) -> Result<Aggregate> {
    let mut sorted: Vec<&RunSummary> = runs.iter().collect();
    sorted.sort_by(|a, b| a.env.cmp(&b.env).then(a.seed.cmp(&b.seed)));
    let mut scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &sorted {
        scores.entry(r.env.clone()).or_default().push(r.final_normalized);
    }
    let all: Vec<f64> = sorted.iter().map(|r| r.final_normalized).collect();
    let per_env: Vec<Vec<f64>> = scores.values().cloned().collect();
    let ci = |metric: &dyn Fn(&[f64]) -> Result<f64>| {
        if per_env.iter().all(|s| s.len() >= 2) {
            let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
            stratified_bootstrap_ci(&per_env, metric, BOOTSTRAP_RESAMPLES, 0.95, &mut rng).map(Some)
        } else {
            Ok(None)
        }
    };
    let gap = |s: &[f64]| optimality_gap(s, 1.0);
    Ok(Aggregate {
        label: label.to_string(),
        runs: runs.len(),
        mean: mean(&all)?,
        iqm: iqm(&all)?,
        optimality_gap: gap(&all)?,
        iqm_ci: ci(&iqm)?,
        optimality_gap_ci: ci(&gap)?,
        scores,
    })
}

fn run_dir_err(path: &Path, message: impl Into<String>) -> Error {
    Error::RunDir {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn record_csv(record: &RunRecord) -> String {
    let mut s = String::from(RECORD_HEADER);
    s.push('\n');
    for r in &record.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step, r.seed, r.raw_mean, r.normalized, r.guide_calls, r.updates
        ));
    }
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = fs::File::open(path).map_err(|e| run_dir_err(path, format!("cannot open: {e}")))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| run_dir_err(path, format!("corrupt JSON: {e}")))
}

/// Writes every artifact of a single-seed run into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, outcome: &TrainOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    let record = &outcome.record;
    fs::write(dir.join("record.csv"), record_csv(record))?;
    let mut timing = String::from("step,wall_seconds\n");
    for (row, secs) in record.rows.iter().zip(&record.wall_seconds) {
        timing.push_str(&format!("{},{secs:.6}\n", row.step));
    }
    fs::write(dir.join("timing.csv"), timing)?;
    fs::write(dir.join("config.resolved"), cfg.to_text())?;
    write_json(&dir.join("summary.json"), &RunSummary::from_record(record))?;
    write_json(
        &dir.join("references.json"),
        &serde_json::json!({
            "env": record.env,
            "random": record.references.random,
            "expert": record.references.expert,
        }),
    )?;
    let ckpt = fs::File::create(dir.join("actor.ckpt"))?;
    outcome.agent.actor_checkpoint(cfg).write_to(BufWriter::new(ckpt))?;
    Ok(())
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn write_aggregate(dir: &Path, agg: &Aggregate) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("summary.json"), agg)
}

/// Loads the per-seed summaries under a run directory (single or multi-seed).
pub fn load_runs(dir: &Path) -> Result<Vec<RunSummary>> {
    if !dir.is_dir() {
        return Err(run_dir_err(dir, "not a directory"));
    }
    if dir.join("record.csv").is_file() {
        return Ok(vec![read_json(&dir.join("summary.json"))?]);
    }
    let mut seeds: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed-"))
        })
        .collect();
    seeds.sort();
    if seeds.is_empty() {
        return Err(run_dir_err(dir, "no record.csv and no seed-* runs"));
    }
    seeds
        .iter()
        .map(|p| {
            if !p.join("record.csv").is_file() {
                return Err(run_dir_err(p, "missing record.csv"));
            }
            read_json(&p.join("summary.json"))
        })
        .collect()
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = fs::File::open(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    Checkpoint::read_from(BufReader::new(file))
}

/// Rebuilds the run config stored in a checkpoint's metadata.
pub fn checkpoint_config(ckpt: &Checkpoint) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = 0;
    for (k, v) in &ckpt.meta {
        if let Some(key) = k.strip_prefix("cfg.") {
            cfg.set(key, v)
                .map_err(|e| Error::Checkpoint(format!("config entry {key}: {e}")))?;
            seen += 1;
        }
    }
    if seen == 0 {
        return Err(Error::Checkpoint("no run config in checkpoint metadata".into()));
    }
    Ok(cfg)
}
