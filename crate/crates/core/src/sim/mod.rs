//! Synthetic attribute-constraint generation task.
//!
//! A query asks for K attribute values. A prompt program assigns each
//! attribute an emphasis level in {0, 1, 2}; the simulated generator then
//! satisfies attribute j independently with probability
//! `clamp(p0 + g * e_j, 0, ceiling)`. Oracle judges read the ground truth
//! back out of the image bytes, so every reward and verdict is exact.

mod config;
mod generator;
mod image;
mod judge;
mod policy;
mod program;
mod query;
mod scripted;

pub use config::SimConfig;
pub use generator::SimGenerator;
pub use image::{sim_generate, SimImage};
pub use judge::{NoisyOracleJudge, OracleJudge, PositionBiasedJudge};
pub use policy::{
    failure_bits, reflective_state_features, Action, ActionSpace, PolicyShapeError, ToyAgent,
    ToyPolicy,
};
pub use program::{parse_clauses, PromptProgram, MAX_EMPHASIS};
pub use query::{ConstraintQuery, QueryError, ATTRIBUTE_CATALOG};
pub use scripted::{NeverTerminatePolicy, ReflectivePolicy, ScriptedPolicy};
