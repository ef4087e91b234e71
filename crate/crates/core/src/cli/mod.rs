//! Batch commands behind the `agentloop` binary.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid
//! configuration or input, 3 backend failure, 4 validation violations.

mod commands;
mod config;

use thiserror::Error;

pub use commands::{
    cmd_build_sft, cmd_diagnose, cmd_run, cmd_train, cmd_validate, read_diagnostic_input, BuildReport,
    RunSummary, CHECKPOINT_FILE, CORPUS_FILE, DIAGNOSTICS_FILE, METRICS_FILE, REPORTS_FILE, SUMMARY_FILE,
    TRAJECTORIES_FILE,
};
pub use config::{
    AgentConfig, BackendsConfig, PolicySpec, RunConfig, GENERATOR_ENDPOINT_VAR, JUDGE_ENDPOINT_VAR,
    TEACHER_ENDPOINT_VAR,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} validation violation(s)")]
    Validation(usize),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}
