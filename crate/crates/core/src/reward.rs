//! Hybrid trajectory reward.
//!
//! `r = r_point + r_format + lambda * r_pair` with `r_point` in {0, 0.7},
//! `r_format` in {0, -0.2}, `r_pair` in {0, 0.3}, and `lambda = 1` when the
//! final image passes, `0.5` otherwise. Arithmetic is done in integer
//! thousandths so every total is the exact decimal.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Trajectory;
use crate::backends::{judge_pair, judge_point, BackendError, ImageStore, Judge, PairWinner};
use crate::seed::rng_for;

const MILLI: i64 = 1000;
const POINT_PASS: i64 = 700;
const FORMAT_PENALTY: i64 = -200;
const PAIR_BONUS: i64 = 300;
const LAMBDA_PASS: i64 = 1000;
const LAMBDA_FAIL: i64 = 500;

pub const R_POINT_PASS: f64 = 0.7;
pub const R_FORMAT_PENALTY: f64 = -0.2;
pub const R_PAIR_BONUS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("illegal reward component {name} = {value}")]
    IllegalRewardComponent { name: &'static str, value: f64 },
}

fn to_f64(milli: i64) -> f64 {
    milli as f64 / MILLI as f64
}

fn component(name: &'static str, value: f64, legal: [i64; 2]) -> Result<i64, RewardError> {
    legal
        .into_iter()
        .find(|&m| to_f64(m) == value)
        .ok_or(RewardError::IllegalRewardComponent { name, value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_point: f64,
    pub r_format: f64,
    pub r_pair: f64,
    pub lambda: f64,
    pub r_total: f64,
}

/// Combines legal components into the total reward.
pub fn combine(r_point: f64, r_format: f64, r_pair: f64) -> Result<RewardBreakdown, RewardError> {
    let point = component("r_point", r_point, [0, POINT_PASS])?;
    let format = component("r_format", r_format, [0, FORMAT_PENALTY])?;
    let pair = component("r_pair", r_pair, [0, PAIR_BONUS])?;
    let lambda = if point == POINT_PASS { LAMBDA_PASS } else { LAMBDA_FAIL };
    let total = point + format + lambda * pair / MILLI;
    Ok(RewardBreakdown {
        r_point: to_f64(point),
        r_format: to_f64(format),
        r_pair: to_f64(pair),
        lambda: to_f64(lambda),
        r_total: to_f64(total),
    })
}

/// 0.7 when the final image passes every condition, 0 otherwise. The judge
/// receives the query's criteria hints.
pub fn pointwise_reward(
    trajectory: &Trajectory,
    judge: &dyn Judge,
    store: &ImageStore,
) -> Result<f64, BackendError> {
    let Some(image) = trajectory.final_image() else {
        return Ok(0.0);
    };
    let r = judge_point(judge, store, &trajectory.query, image, &trajectory.query.hints)?;
    Ok(if r.pass { R_POINT_PASS } else { 0.0 })
}

/// -0.2 when any tool call failed to parse (retried or not), 0 otherwise.
pub fn format_reward(trajectory: &Trajectory) -> f64 {
    if trajectory.parse_failures > 0 || trajectory.has_tool_error() {
        R_FORMAT_PENALTY
    } else {
        0.0
    }
}

/// 0.3 when there are at least two rounds and every later image beats its
/// predecessor, 0 otherwise. Each comparison is shuffled independently.
pub fn pairwise_reward<R: Rng + ?Sized>(
    trajectory: &Trajectory,
    judge: &dyn Judge,
    store: &ImageStore,
    rng: &mut R,
) -> Result<f64, BackendError> {
    if trajectory.rounds.len() < 2 {
        return Ok(0.0);
    }
    for pair in trajectory.rounds.windows(2) {
        let r = judge_pair(judge, store, &pair[0].image, &pair[1].image, rng)?;
        if r.winner != PairWinner::Second {
            return Ok(0.0);
        }
    }
    Ok(R_PAIR_BONUS)
}

/// Full reward for one trajectory. Judge failures score the affected
/// component as 0 instead of aborting.
pub fn score_trajectory(
    trajectory: &Trajectory,
    judge: &dyn Judge,
    store: &ImageStore,
    seed: u64,
) -> RewardBreakdown {
    let point = pointwise_reward(trajectory, judge, store).unwrap_or_else(|e| {
        log::warn!("pointwise judge failed, scoring 0: {e}");
        0.0
    });
    let mut rng = rng_for(seed, &[0x7061_6972]);
    let pair = pairwise_reward(trajectory, judge, store, &mut rng).unwrap_or_else(|e| {
        log::warn!("pairwise judge failed, scoring 0: {e}");
        0.0
    });
    combine(point, format_reward(trajectory), pair).expect("components are legal by construction")
}
