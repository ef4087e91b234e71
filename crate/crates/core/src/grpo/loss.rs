use super::advantage::AdvantageSet;
use super::config::TrainerConfig;
use super::rollout::RolloutGroup;
use super::GrpoError;
use crate::agent::TokenSource;
use crate::sim::ToyPolicy;

/// Clipped surrogate for one token: `min(clip(ratio) * A, ratio * A)`.
pub fn surrogate_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    clipped.min(ratio * advantage)
}

/// Loss (the negated objective) and its gradient with respect to the policy
/// weights.
///
/// The objective averages, over trajectories, the per-trajectory mean of the
/// clipped surrogate over policy tokens. Environment tokens are skipped
/// entirely. Policy tokens without a sampling record have no parameters
/// behind them and enter with ratio 1. With a positive `kl_coefficient` the
/// per-token estimate `exp(old - new) - (old - new) - 1` against the
/// sampling policy is subtracted.
pub fn grpo_loss_and_gradient(
    group: &RolloutGroup,
    advantages: &AdvantageSet,
    policy: &ToyPolicy,
    cfg: &TrainerConfig,
) -> Result<(f64, Vec<f64>), GrpoError> {
    assert_eq!(group.len(), advantages.values.len(), "one advantage per trajectory");
    let mut grad = vec![0.0; policy.weights.len()];
    let mut objective = 0.0;
    let g = group.len().max(1) as f64;
    let eps = cfg.epsilon_clip;
    let beta = cfg.kl_coefficient;
    for (t, &adv) in group.trajectories.iter().zip(&advantages.values) {
        if !adv.is_finite() {
            return Err(GrpoError::NonFiniteLoss(format!("advantage {adv}")));
        }
        let policy_tokens = t.token_stream.iter().filter(|tok| tok.source == TokenSource::Policy);
        let len = policy_tokens.clone().count();
        if len == 0 {
            continue;
        }
        let weight = 1.0 / (len as f64 * g);
        for tok in policy_tokens {
            let Some(s) = &tok.sample else {
                objective += weight * adv;
                continue;
            };
            let lp = policy.log_prob(&s.features, &s.allowed, s.action);
            let ratio = (lp - s.logprob).exp();
            if !ratio.is_finite() {
                return Err(GrpoError::NonFiniteLoss(format!(
                    "ratio {ratio} (new {lp}, old {})",
                    s.logprob
                )));
            }
            let term = surrogate_term(ratio, adv, eps);
            // The unclipped branch carries the gradient; the clipped branch is
            // constant in the weights.
            let mut coef = if ratio * adv <= term { ratio * adv } else { 0.0 };
            let mut kl = 0.0;
            if beta > 0.0 {
                let u = s.logprob - lp;
                kl = u.exp() - u - 1.0;
                coef -= beta * (1.0 - u.exp());
            }
            objective += weight * (term - beta * kl);
            if coef != 0.0 {
                policy.accumulate_grad_log_prob(&s.features, &s.allowed, s.action, -weight * coef, &mut grad);
            }
        }
    }
    let loss = -objective;
    if !loss.is_finite() {
        return Err(GrpoError::NonFiniteLoss(format!("loss {loss}")));
    }
    Ok((loss, grad))
}
