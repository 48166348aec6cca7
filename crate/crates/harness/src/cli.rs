//! `attack` command line.
//!
//! ```text
//! attack run --config exp.toml [--seed 3] [--out-dir out]
//! attack summarize --traces 'out/traces/*.jsonl' --budgets 50,100,200
//! attack metrics --results out/results.json [--threshold 0.0627]
//! attack uar --generator bilinear:0.2,0.8,0.5 --dataset data.json --oracle oracle.toml
//! ```
//!
//! Exit codes: 0 success, 1 run or data failure, 2 configuration error,
//! 3 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};

use bodba::generators::{generate, GeneratorKind, GeneratorSpec};
use bodba::metrics::{
    compute_uar, quantile_sorted, success_rate, summarize_traces, summary_csv, UarReport, DEFAULT_LINF_THRESHOLD,
};
use bodba::{LowDimPoint, Sample};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{build_oracle, ExperimentConfig, ImageShape, OracleConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{load_traces, run_experiment, ResultsManifest, SUMMARY_FILE};

#[derive(Debug, Parser)]
#[command(name = "attack", version, about = "Bayesian-optimization decision-based attacks")]
pub struct Cli {
    /// Replaces the config's seed list (run) or sets the generator seed (uar).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every task and seed of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Median and quartiles of best distance at each budget, as CSV.
    Summarize {
        /// Glob matching trace files.
        #[arg(long)]
        traces: String,
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<usize>,
    },
    /// Success rate and distortion statistics of a results manifest, as JSON.
    Metrics {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LINF_THRESHOLD)]
        threshold: f64,
    },
    /// Universal evasion rate of one generated perturbation over a dataset.
    Uar {
        /// `kind:c1,c2,...` with coordinates in [0, 1].
        #[arg(long)]
        generator: String,
        /// JSON: `{"shape": {...}, "samples": [{"values": [...], "label": 0}]}`.
        #[arg(long)]
        dataset: PathBuf,
        /// TOML with `[image]` and `[oracle]` tables as in experiment configs.
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LINF_THRESHOLD)]
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: usize,
    pub found: usize,
    pub threshold: f64,
    pub asr: f64,
    /// Over runs that found an adversarial example; absent if none did.
    pub l2: Option<Spread>,
    pub linf: Option<Spread>,
    pub mean_queries: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    fn of(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(Spread {
            median: quantile_sorted(&values, 0.5),
            q1: quantile_sorted(&values, 0.25),
            q3: quantile_sorted(&values, 0.75),
        })
    }
}

pub fn manifest_metrics(manifest: &ResultsManifest, threshold: f64) -> Result<MetricsReport> {
    let linf: Vec<f64> = manifest
        .runs
        .iter()
        .map(|r| if r.found_adversarial { r.distance_linf } else { f64::INFINITY })
        .collect();
    let asr = success_rate(&linf, threshold).map_err(|e| HarnessError::Input(format!("metrics: {e}")))?;
    let found: Vec<_> = manifest.runs.iter().filter(|r| r.found_adversarial).collect();
    let queries: usize = manifest.runs.iter().map(|r| r.queries_used).sum();
    Ok(MetricsReport {
        runs: manifest.runs.len(),
        found: found.len(),
        threshold,
        asr,
        l2: Spread::of(found.iter().map(|r| r.distance_l2).collect()),
        linf: Spread::of(found.iter().map(|r| r.distance_linf).collect()),
        mean_queries: queries as f64 / manifest.runs.len() as f64,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dataset {
    shape: ImageShape,
    samples: Vec<DatasetSample>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSample {
    values: Vec<f64>,
    label: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleFile {
    image: ImageShape,
    oracle: OracleConfig,
}

/// Parses `kind:c1,c2,...`.
pub fn parse_generator_point(s: &str) -> Result<(GeneratorKind, LowDimPoint)> {
    let bad = |msg: String| HarnessError::Config(format!("--generator {s:?}: {msg}"));
    let (kind, coords) = s.split_once(':').ok_or_else(|| bad("expected kind:c1,c2,...".into()))?;
    let kind: GeneratorKind = kind.trim().parse().map_err(|e: bodba::Error| bad(e.to_string()))?;
    let coords = coords
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| bad(format!("{c:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let point = LowDimPoint::new(coords).map_err(|e| bad(e.to_string()))?;
    Ok((kind, point))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn uar(generator: &str, dataset: &Path, oracle: &Path, epsilon: f64, seed: Option<u64>) -> Result<UarReport> {
    let (kind, point) = parse_generator_point(generator)?;

    let mut file: OracleFile =
        toml::from_str(&read_text(oracle)?).map_err(|e| HarnessError::Config(format!("{}: {e}", oracle.display())))?;
    if let OracleConfig::Mlp { weights, .. } = &mut file.oracle {
        if weights.is_relative() {
            *weights = oracle.parent().unwrap_or_else(|| Path::new(".")).join(&*weights);
        }
    }
    let shape = file.image.into();
    let classifier = build_oracle(&file.oracle, shape, None)?;

    let data: Dataset = serde_json::from_str(&read_text(dataset)?)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", dataset.display())))?;
    if bodba::Shape::from(data.shape) != shape {
        return Err(HarnessError::Input(format!(
            "{}: dataset shape {:?} differs from oracle image {:?}",
            dataset.display(),
            data.shape,
            file.image
        )));
    }
    let samples = data
        .samples
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            Sample::new(s.values, shape)
                .map(|x| (x, s.label))
                .map_err(|e| HarnessError::Input(format!("{} sample {i}: {e}", dataset.display())))
        })
        .collect::<Result<Vec<_>>>()?;

    let spec = GeneratorSpec::new(kind, shape)
        .map_err(|e| HarnessError::Config(e.to_string()))?
        .with_seed(seed.unwrap_or(0));
    if point.dim() != spec.input_dim() {
        return Err(HarnessError::Config(format!(
            "--generator {generator:?}: {} takes {} coordinates, got {}",
            kind.name(),
            spec.input_dim(),
            point.dim()
        )));
    }
    let s = generate(&spec, &point)?;
    Ok(compute_uar(&s, &samples, classifier.as_ref(), epsilon)?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Runs one command, writing its report to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let stdout_err = |e: std::io::Error| HarnessError::io("<stdout>", e);
    match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seeds = vec![seed];
            }
            if let Some(dir) = cli.out_dir {
                cfg.output_dir = dir;
            }
            let report = run_experiment(&cfg)?;
            write!(out, "{}", summary_csv(&report.summary)).map_err(stdout_err)?;
        }
        Command::Summarize { traces, budgets } => {
            let loaded = load_traces(&traces)?;
            if loaded.is_empty() {
                return Err(HarnessError::Input(format!("no traces match {traces:?}")));
            }
            let rows = summarize_traces(&loaded, &budgets).map_err(|e| HarnessError::Input(e.to_string()))?;
            let csv = summary_csv(&rows);
            if let Some(dir) = cli.out_dir {
                std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
                let path = dir.join(SUMMARY_FILE);
                std::fs::write(&path, &csv).map_err(|e| HarnessError::io(&path, e))?;
            }
            write!(out, "{csv}").map_err(stdout_err)?;
        }
        Command::Metrics { results, threshold } => {
            let manifest = ResultsManifest::load(&results)?;
            let report = manifest_metrics(&manifest, threshold)?;
            writeln!(out, "{}", to_json(&report)).map_err(stdout_err)?;
        }
        Command::Uar {
            generator,
            dataset,
            oracle,
            epsilon,
        } => {
            let report = uar(&generator, &dataset, &oracle, epsilon, cli.seed)?;
            writeln!(out, "{}", to_json(&report)).map_err(stdout_err)?;
        }
    }
    Ok(())
}
