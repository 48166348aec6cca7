//! Experiment driver for the bodba attacks: TOML configuration, parallel
//! runs with persisted traces, budget summaries and the `attack` CLI.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{load_traces, run_experiment, ExperimentReport, ResultsManifest, RunRecord};
