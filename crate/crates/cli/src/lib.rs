//! Batch experiments for model-based compressive sensing: recovery runs,
//! measurement sweeps, noise studies, bound tables and model self-checks,
//! all written as CSV.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Experiment, ExperimentConfig, ModelTag, SignalKind};
pub use experiments::{
    cmd_bounds, cmd_modelcheck, cmd_noise, cmd_recover, cmd_sweep_m, cmd_sweep_n, run_modelcheck,
    RunOutput,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] modelcs::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
