//! Runs every (task, seed) pair of a configuration and persists traces,
//! the results manifest and the budget summary.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! traces/task{i}_seed{s}.jsonl
//! results.json
//! summary.csv
//! ```
//!
//! Each trace is written as soon as its run finishes and the manifest is
//! rewritten after every run, so an interrupted experiment keeps what it
//! completed.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use bodba::metrics::{summarize_traces, summary_csv, BudgetSummary};
use bodba::trace::AttackTrace;
use bodba::{run_attack, run_random_baseline, AttackError, AttackResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AttackKind, ExperimentConfig};
use crate::error::{HarnessError, Result};

pub const MANIFEST_FILE: &str = "results.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_DIR: &str = "traces";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: usize,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub trace: String,
    pub found_adversarial: bool,
    pub converged: bool,
    pub distance_l2: f64,
    pub distance_linf: f64,
    pub queries_used: usize,
    pub best_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsManifest {
    pub config_hash: String,
    pub attack: String,
    pub generator: String,
    pub budget: usize,
    pub runs: Vec<RunRecord>,
    /// Present once every run has finished.
    pub summary: Option<String>,
}

impl ResultsManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub manifest: ResultsManifest,
    pub summary: Vec<BudgetSummary>,
}

pub fn trace_file_name(task: usize, seed: u64) -> String {
    format!("{TRACE_DIR}/task{task}_seed{seed}.jsonl")
}

/// Write via a sibling temporary file and rename, so readers never see a
/// half-written file.
fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("partial");
    let file = fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out)?;
    drop(out);
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn write_manifest(dir: &Path, manifest: &ResultsManifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    write_atomic(&path, |out| {
        serde_json::to_writer_pretty(&mut *out, manifest).map_err(|e| HarnessError::io(&path, e.into()))?;
        std::io::Write::write_all(out, b"\n").map_err(|e| HarnessError::io(&path, e))
    })
}

fn run_one(cfg: &ExperimentConfig, hash: &str, task: usize, seed: u64) -> Result<(RunRecord, AttackTrace)> {
    let run_err = |message: String| HarnessError::Run { task, seed, message };
    let origin = cfg.origin(task)?;
    let oracle = cfg.build_oracle(&origin)?;
    let attack_task = cfg.attack_task(task, origin, oracle.as_ref())?;
    let spec = cfg.generator_spec()?;
    let search = cfg.search_params()?;
    let outcome = match cfg.attack {
        AttackKind::Bo => run_attack(&attack_task, oracle.as_ref(), &spec, &cfg.bo_config(seed), &search),
        AttackKind::Random => run_random_baseline(&attack_task, oracle.as_ref(), &spec, &search, seed),
    };
    let result: AttackResult = match outcome {
        Ok(r) => r,
        Err(AttackError::NoAdversarialFound(r)) => *r,
        Err(AttackError::Core(e)) => return Err(run_err(e.to_string())),
    };

    let mut trace = result.trace;
    trace.header.config_hash = hash.to_string();
    if !cfg.wall_clock {
        for r in &mut trace.records {
            r.elapsed_ms = 0.0;
        }
    }
    let name = trace_file_name(task, seed);
    let path = cfg.output_dir.join(&name);
    write_atomic(&path, |out| trace.write_jsonl(out).map_err(HarnessError::from))?;

    let record = RunRecord {
        task,
        seed,
        trace: name,
        found_adversarial: result.found_adversarial,
        converged: result.converged,
        distance_l2: result.distance_l2,
        distance_linf: result.distance_linf,
        queries_used: result.queries_used,
        best_point: result.best_point.coords().to_vec(),
    };
    Ok((record, trace))
}

/// Runs all attacks (in parallel), then writes the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    let trace_dir = dir.join(TRACE_DIR);
    fs::create_dir_all(&trace_dir).map_err(|e| HarnessError::io(&trace_dir, e))?;
    let hash = cfg.hash();

    let manifest = Mutex::new(ResultsManifest {
        config_hash: hash.clone(),
        attack: cfg.attack.name().into(),
        generator: cfg.generator.clone(),
        budget: cfg.budget,
        runs: Vec::new(),
        summary: None,
    });
    let jobs: Vec<(usize, u64)> = (0..cfg.tasks.len())
        .flat_map(|t| cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();

    let outcomes: Vec<Result<AttackTrace>> = jobs
        .par_iter()
        .map(|&(task, seed)| {
            let (record, trace) = run_one(cfg, &hash, task, seed)?;
            let mut m = manifest.lock().expect("manifest lock");
            m.runs.push(record);
            m.runs.sort_by_key(|r| (r.task, r.seed));
            write_manifest(dir, &m)?;
            Ok(trace)
        })
        .collect();
    let traces = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let budgets = if cfg.summary_budgets.is_empty() {
        vec![cfg.budget]
    } else {
        cfg.summary_budgets.clone()
    };
    let summary = summarize_traces(&traces, &budgets)?;
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, summary_csv(&summary)).map_err(|e| HarnessError::io(&summary_path, e))?;

    let mut manifest = manifest.into_inner().expect("manifest lock");
    manifest.summary = Some(SUMMARY_FILE.into());
    write_manifest(dir, &manifest)?;
    Ok(ExperimentReport {
        output_dir: dir.clone(),
        manifest,
        summary,
    })
}

/// Reads every trace matching `pattern` (sorted by path).
pub fn load_traces(pattern: &str) -> Result<Vec<AttackTrace>> {
    let paths = glob::glob(pattern).map_err(|e| HarnessError::Config(format!("bad glob {pattern:?}: {e}")))?;
    let mut paths: Vec<PathBuf> = paths
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| HarnessError::io(e.path().to_path_buf(), std::io::Error::other(e.to_string())))?;
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let file = fs::File::open(p).map_err(|e| HarnessError::io(p, e))?;
            AttackTrace::read_jsonl(std::io::BufReader::new(file)).map_err(|e| match e {
                bodba::Error::Io(io) => HarnessError::io(p, io),
                other => HarnessError::Input(format!("{}: {other}", p.display())),
            })
        })
        .collect()
}
