//! Experiment orchestration: scenario files, built-in study presets,
//! training/evaluation loops across replications, and result emission
//! (CSV curves, summaries, plot data, weight checkpoints).

mod config;
mod output;
mod presets;
mod runner;

pub use config::{Condition, PolicyChoice, Scenario, Study};
pub use output::{mean_ci95, write_csv, write_plotdata, CsvRow, CSV_HEADER};
pub use presets::{
    dense, experiment_agent, experiment_reward, experiment_sim, jamming, mac, mobility, preset,
};
pub use runner::{
    build_policy, checkpoint_path, run_study, PolicyInstance, RunOptions, StudyReport,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("invalid study: {0}")]
    InvalidStudy(String),
    #[error("unknown preset `{0}` (available: mobility, dense, mac, jamming)")]
    UnknownPreset(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
}
