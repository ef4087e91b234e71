use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::advantage::normalize_advantages;
use super::config::TrainerConfig;
use super::loss::grpo_loss_and_gradient;
use super::resample::resample_by_rounds;
use super::rollout::{rollout_group, Environment, RolloutGroup};
use super::GrpoError;
use crate::agent::jsonl::write_atomic;
use crate::backends::ImageStore;
use crate::seed::{derive_seed, label, rng_for};
use crate::sim::{ConstraintQuery, OracleJudge, SimConfig, SimGenerator, ToyAgent, ToyPolicy};

/// One row of the metrics stream. Rates are over all G' rollouts of the
/// iteration, before resampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_rounds: f64,
    pub pass_rate: f64,
    pub pair_reward_rate: f64,
}

impl IterationMetrics {
    fn from_groups(iteration: usize, groups: &[RolloutGroup]) -> Self {
        let mut n = 0usize;
        let (mut reward, mut rounds, mut pass, mut pair) = (0.0, 0.0, 0usize, 0usize);
        for g in groups {
            for (t, r) in g.trajectories.iter().zip(&g.rewards) {
                n += 1;
                reward += r.r_total;
                rounds += t.n as f64;
                pass += usize::from(r.r_point > 0.0);
                pair += usize::from(r.r_pair > 0.0);
            }
        }
        let d = n.max(1) as f64;
        Self {
            iteration,
            mean_reward: reward / d,
            mean_rounds: rounds / d,
            pass_rate: pass as f64 / d,
            pair_reward_rate: pair as f64 / d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: ToyPolicy,
    pub metrics: Vec<IterationMetrics>,
}

/// Mean of `field` over the first and last `window` iterations.
pub fn window_means(
    metrics: &[IterationMetrics],
    window: usize,
    field: impl Fn(&IterationMetrics) -> f64,
) -> Option<(f64, f64)> {
    if metrics.is_empty() || window == 0 {
        return None;
    }
    let w = window.min(metrics.len());
    let mean = |s: &[IterationMetrics]| s.iter().map(&field).sum::<f64>() / s.len() as f64;
    Some((mean(&metrics[..w]), mean(&metrics[metrics.len() - w..])))
}

/// Runs `cfg.iterations` updates of the toy policy against the simulated
/// environment, calling `sink` after each iteration in order.
///
/// Each iteration samples `batch_size` fresh queries, rolls out G' episodes
/// per query with the current weights, keeps G per query by round count,
/// normalizes rewards within each kept group, and takes one gradient step
/// on the mean loss over groups.
pub fn train(
    cfg: &TrainerConfig,
    sim: &SimConfig,
    initial: ToyPolicy,
    sink: &mut dyn FnMut(&IterationMetrics),
) -> Result<TrainOutcome, GrpoError> {
    cfg.validate()?;
    sim.validate().map_err(GrpoError::InvalidConfig)?;
    if initial.k != sim.k || initial.n_max != cfg.n_max {
        return Err(GrpoError::InvalidConfig(format!(
            "policy shape (K={}, n_max={}) does not match the run (K={}, n_max={})",
            initial.k, initial.n_max, sim.k, cfg.n_max
        )));
    }
    let generator = SimGenerator::new("sim", *sim);
    let judge = OracleJudge::default();
    let mut policy = initial;
    let mut metrics = Vec::with_capacity(cfg.iterations);
    let (q_label, r_label, s_label) = (label("query"), label("rollout"), label("resample"));

    for it in 0..cfg.iterations {
        let store = ImageStore::new();
        let env = Environment {
            generator: &generator,
            perception: &judge,
            reward_judge: &judge,
            store: &store,
        };
        let agent = ToyAgent::new(&policy);
        let groups: Vec<RolloutGroup> = (0..cfg.batch_size)
            .into_par_iter()
            .map(|q| {
                let path = [it as u64, q as u64];
                let mut qrng = rng_for(cfg.seed, &[q_label, path[0], path[1]]);
                let query = ConstraintQuery::sample(sim.k, &mut qrng)
                    .expect("K validated")
                    .to_query(format!("it{it}-q{q}"));
                let seed = derive_seed(cfg.seed, &[r_label, path[0], path[1]]);
                rollout_group(&query, &agent, &env, cfg, seed)
            })
            .collect::<Result<_, _>>()?;

        let step: Vec<(f64, Vec<f64>)> = groups
            .par_iter()
            .enumerate()
            .map(|(q, group)| {
                let mut rng = rng_for(cfg.seed, &[s_label, it as u64, q as u64]);
                let kept = resample_by_rounds(group, cfg.g, &mut rng);
                let adv = normalize_advantages(&kept.totals())?;
                grpo_loss_and_gradient(&kept, &adv, &policy, cfg)
            })
            .collect::<Result<_, GrpoError>>()?;

        let scale = cfg.learning_rate / step.len() as f64;
        let mut next = policy.weights.clone();
        for (_, grad) in &step {
            for (w, g) in next.iter_mut().zip(grad) {
                *w -= scale * g;
            }
        }
        policy.weights = next;

        let m = IterationMetrics::from_groups(it, &groups);
        log::debug!(
            "iteration {it}: reward {:.4} rounds {:.3}",
            m.mean_reward,
            m.mean_rounds
        );
        sink(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome { policy, metrics })
}

pub fn metrics_csv(metrics: &[IterationMetrics]) -> Result<Vec<u8>, GrpoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in metrics {
        w.serialize(m)?;
    }
    w.into_inner().map_err(|e| GrpoError::Io(e.into_error()))
}

pub fn write_metrics_csv(path: &Path, metrics: &[IterationMetrics]) -> Result<(), GrpoError> {
    Ok(write_atomic(path, &metrics_csv(metrics)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub trainer: TrainerConfig,
    pub environment: SimConfig,
    pub seed: u64,
    pub kl_coefficient: f64,
    pub iterations_completed: usize,
    pub k: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub weights: Vec<f64>,
}

impl Checkpoint {
    pub fn new(trainer: &TrainerConfig, environment: &SimConfig, policy: &ToyPolicy, iterations_completed: usize) -> Self {
        Self {
            header: CheckpointHeader {
                trainer: *trainer,
                environment: *environment,
                seed: trainer.seed,
                kl_coefficient: trainer.kl_coefficient,
                iterations_completed,
                k: policy.k,
                n_max: policy.n_max,
            },
            weights: policy.weights.clone(),
        }
    }

    pub fn policy(&self) -> Result<ToyPolicy, GrpoError> {
        ToyPolicy::from_weights(self.header.k, self.header.n_max, self.weights.clone())
            .map_err(|e| GrpoError::InvalidConfig(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), GrpoError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(write_atomic(path, text.as_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, GrpoError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
