//! Cold-start corpus construction.
//!
//! Hard prompts are screened for solvability, a teacher writes a first
//! round and judges it, failing cases get a hint-guided second round, and
//! the accepted trajectories are sampled by stratum into a loss-masked
//! corpus. Every stage reports what it kept and why it dropped the rest.

mod diagnostics;
mod pipeline;
mod sample;
mod stages;
mod teacher;
mod types;
pub mod validate;

use std::collections::BTreeMap;

use thiserror::Error;

pub use diagnostics::{diagnostics, DiagnosticRecord, Diagnostics};
pub use pipeline::{run_pipeline, sim_pool, PipelineConfig, PipelineOutput, SftBackends};
pub use sample::{
    allocate, balanced_sample, default_strata, effective_fractions, largest_feasible_size,
    SampleOutcome, StratumTarget,
};
pub use stages::{
    check_consistency, filter_pool, screen_candidate, synthesize_judgment, synthesize_reflection,
    synthesize_round_one, Branch, HintLeakScreen, ReflectionContext, SCREEN_ATTEMPTS,
};
pub use teacher::{
    judge_messages, parse_verdict, reflect_messages, rewrite_messages, MockTeacher,
    MockTeacherConfig, DEFAULT_RUBRIC, JUDGE_TASK, REFLECT_TASK, REWRITE_TASK,
};
pub use types::{
    reports_telescope, PoolCandidate, PoolRecord, Rejection, SftRound, SftTrajectory, Source,
    StageReport,
};

#[derive(Debug, Error)]
pub enum SftError {
    #[error("teacher unavailable: {0}")]
    TeacherUnavailable(String),
    #[error("insufficient stratum: requested {requested:?}, available {available:?}")]
    InsufficientStratum {
        requested: BTreeMap<String, usize>,
        available: BTreeMap<String, usize>,
    },
    #[error("invalid strata targets: {0}")]
    InvalidTargets(String),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
}
