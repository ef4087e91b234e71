use rayon::prelude::*;

use super::config::TrainerConfig;
use crate::agent::{
    run_episode, BackendFailureMode, EpisodeConfig, EpisodeError, Policy, Query, Trajectory,
};
use crate::backends::{ImageGenerator, ImageStore, Judge};
use crate::reward::{score_trajectory, RewardBreakdown};
use crate::seed::derive_seed;

/// Backends an episode runs against.
#[derive(Clone, Copy)]
pub struct Environment<'a> {
    pub generator: &'a dyn ImageGenerator,
    /// The agent's view of its own images.
    pub perception: &'a dyn Judge,
    /// Scores finished trajectories.
    pub reward_judge: &'a dyn Judge,
    pub store: &'a ImageStore,
}

/// Rollouts for one query with their rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub query: Query,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<RewardBreakdown>,
}

impl RolloutGroup {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| r.r_total).collect()
    }

    /// Keeps the members at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            query: self.query.clone(),
            trajectories: indices.iter().map(|&i| self.trajectories[i].clone()).collect(),
            rewards: indices.iter().map(|&i| self.rewards[i]).collect(),
        }
    }
}

/// Samples G' episodes for `query`. Episode i uses a seed derived from
/// `group_seed` and i, so the group is reproducible and can be computed in
/// parallel. Backend failures are recorded on the trajectory and scored
/// conservatively.
pub fn rollout_group(
    query: &Query,
    policy: &dyn Policy,
    env: &Environment<'_>,
    cfg: &TrainerConfig,
    group_seed: u64,
) -> Result<RolloutGroup, EpisodeError> {
    let scored: Vec<(Trajectory, RewardBreakdown)> = (0..cfg.g_prime)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(group_seed, &[i as u64]);
            let ep = EpisodeConfig {
                n_max: cfg.n_max,
                max_retries: 1,
                seed,
                on_backend_failure: BackendFailureMode::Record,
            };
            let t = run_episode(query, policy, env.generator, env.perception, env.store, &ep)?;
            let r = score_trajectory(&t, env.reward_judge, env.store, seed);
            Ok((t, r))
        })
        .collect::<Result<_, EpisodeError>>()?;
    let (trajectories, rewards) = scored.into_iter().unzip();
    Ok(RolloutGroup {
        query: query.clone(),
        trajectories,
        rewards,
    })
}
