//! Experiment configuration, seeded execution, persistence and reporting.

mod config;
mod presets;
mod report;
mod rng;
mod runner;

use thiserror::Error;

pub use config::{parse_config, AgentKind, AgentSection, EnvKind, EnvSection, ExperimentConfig};
pub use presets::{list_presets, load_preset, preset_source, PresetInfo, DESK_SUFFIX};
pub use report::{aggregate_dir, compare, write_compare_report, CompareReport, BIN_SIZE};
pub use rng::{RngContract, Stream};
pub use runner::{csv_path, meta_path, run, run_to_writer, RunSummary};

use crate::agents::AgentError;
use crate::approximator::NetError;
use crate::analysis::AnalysisError;
use crate::environments::EnvError;
use crate::exploration::ExplorationError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("run aborted at step {step}: {message}")]
    Aborted { step: u64, message: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Exploration(#[from] ExplorationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Resolves a preset name or a path to a TOML file.
pub fn resolve_config(spec: &str) -> Result<ExperimentConfig, HarnessError> {
    match load_preset(spec) {
        Err(HarnessError::UnknownPreset(_)) => {
            let text = std::fs::read_to_string(spec).map_err(|e| {
                HarnessError::Config(format!("`{spec}` is neither a preset nor a readable file: {e}"))
            })?;
            parse_config(&text)
        }
        other => other,
    }
}
