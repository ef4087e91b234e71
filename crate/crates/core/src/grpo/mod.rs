//! Group relative policy optimization for the multi-round agent.

mod advantage;
mod config;
mod loss;
mod resample;
mod rollout;
mod train;

use thiserror::Error;

pub use advantage::{normalize_advantages, AdvantageSet};
pub use config::TrainerConfig;
pub use loss::{grpo_loss_and_gradient, surrogate_term};
pub use resample::{bucket_quotas, resample_by_rounds, resample_indices};
pub use rollout::{rollout_group, Environment, RolloutGroup};
pub use train::{
    metrics_csv, train, window_means, write_metrics_csv, Checkpoint, CheckpointHeader,
    IterationMetrics, TrainOutcome,
};

use crate::agent::EpisodeError;

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("advantage normalization needs at least 2 rewards, got {size}")]
    DegenerateGroup { size: usize },
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
