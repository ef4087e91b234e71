//! Linear-softmax toy policy.
//!
//! At every decision the policy picks one of `2K + 2` actions: raise or lower
//! the emphasis of attribute j, submit the current prompt to the generator,
//! or terminate. Within a turn it keeps editing until it submits or
//! terminates; each choice is one policy token with a sampling record, so the
//! trainer can recompute its probability under new weights.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::program::{PromptProgram, MAX_EMPHASIS};
use crate::agent::{
    Policy, PolicyToken, PolicyTurn, SampleRecord, TurnContext, Verdict, GENERATE_CLOSE,
    GENERATE_OPEN, JUDGE_CLOSE, JUDGE_OPEN, TERMINATE, THINK_CLOSE, THINK_OPEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Raise(usize),
    Lower(usize),
    Submit,
    Terminate,
}

/// Index mapping for the action vocabulary of a K-attribute task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub k: usize,
}

impl ActionSpace {
    pub fn size(&self) -> usize {
        2 * self.k + 2
    }

    pub fn index(&self, a: Action) -> usize {
        match a {
            Action::Raise(j) => j,
            Action::Lower(j) => self.k + j,
            Action::Submit => 2 * self.k,
            Action::Terminate => 2 * self.k + 1,
        }
    }

    pub fn action(&self, i: usize) -> Action {
        match i {
            i if i < self.k => Action::Raise(i),
            i if i < 2 * self.k => Action::Lower(i - self.k),
            i if i == 2 * self.k => Action::Submit,
            _ => Action::Terminate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyShapeError {
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be finite")]
    NonFinite,
}

/// Feature vector: one-hot decision index (0 before the first image, i after
/// round i), emphasis levels scaled to [0, 1], failure bits of the latest
/// verdict, and a bias term.
pub fn reflective_state_features(
    n_max: usize,
    decision: usize,
    emphasis: &[u8],
    failed: &[bool],
) -> Vec<f64> {
    let mut f = vec![0.0; n_max + 1];
    f[decision.min(n_max)] = 1.0;
    f.extend(emphasis.iter().map(|&e| f64::from(e) / f64::from(MAX_EMPHASIS)));
    f.extend(failed.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    f.push(1.0);
    f
}

/// Failure indicator per clause: set when the clause is listed as a
/// deficiency.
pub fn failure_bits(clauses: &[String], verdict: Option<&Verdict>) -> Vec<bool> {
    match verdict {
        None => vec![false; clauses.len()],
        Some(v) => clauses
            .iter()
            .map(|c| v.deficiencies.iter().any(|d| d == c))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub k: usize,
    pub n_max: usize,
    /// Row-major `actions x features`.
    pub weights: Vec<f64>,
}

impl ToyPolicy {
    pub fn feature_dim_for(k: usize, n_max: usize) -> usize {
        n_max + 1 + 2 * k + 1
    }

    pub fn zeros(k: usize, n_max: usize) -> Self {
        let rows = ActionSpace { k }.size();
        Self {
            k,
            n_max,
            weights: vec![0.0; rows * Self::feature_dim_for(k, n_max)],
        }
    }

    pub fn from_weights(k: usize, n_max: usize, weights: Vec<f64>) -> Result<Self, PolicyShapeError> {
        let expected = ActionSpace { k }.size() * Self::feature_dim_for(k, n_max);
        if weights.len() != expected {
            return Err(PolicyShapeError::WeightCount {
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyShapeError::NonFinite);
        }
        Ok(Self { k, n_max, weights })
    }

    pub fn actions(&self) -> ActionSpace {
        ActionSpace { k: self.k }
    }

    pub fn feature_dim(&self) -> usize {
        Self::feature_dim_for(self.k, self.n_max)
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        let d = self.feature_dim();
        assert_eq!(features.len(), d, "feature length");
        self.weights
            .chunks_exact(d)
            .map(|row| row.iter().zip(features).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// Log-probabilities under the softmax restricted to allowed actions;
    /// disallowed actions get `-inf`.
    pub fn log_probs(&self, features: &[f64], allowed: &[bool]) -> Vec<f64> {
        let logits = self.logits(features);
        let max = logits
            .iter()
            .zip(allowed)
            .filter(|(_, &ok)| ok)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits
            .iter()
            .zip(allowed)
            .filter(|(_, &ok)| ok)
            .map(|(&l, _)| (l - max).exp())
            .sum();
        let lse = max + sum.ln();
        logits
            .iter()
            .zip(allowed)
            .map(|(&l, &ok)| if ok { l - lse } else { f64::NEG_INFINITY })
            .collect()
    }

    pub fn log_prob(&self, features: &[f64], allowed: &[bool], action: usize) -> f64 {
        self.log_probs(features, allowed)[action]
    }

    /// Adds `scale * d log p(action) / d weights` into `grad`.
    pub fn accumulate_grad_log_prob(
        &self,
        features: &[f64],
        allowed: &[bool],
        action: usize,
        scale: f64,
        grad: &mut [f64],
    ) {
        let d = self.feature_dim();
        let lp = self.log_probs(features, allowed);
        for (b, row) in grad.chunks_exact_mut(d).enumerate() {
            if !allowed[b] {
                continue;
            }
            let coef = scale * (f64::from(u8::from(b == action)) - lp[b].exp());
            if coef == 0.0 {
                continue;
            }
            for (g, x) in row.iter_mut().zip(features) {
                *g += coef * x;
            }
        }
    }

    /// Samples an action; returns it with its log-probability.
    pub fn policy_step<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        allowed: &[bool],
        rng: &mut R,
    ) -> (usize, f64) {
        assert!(features.iter().all(|x| x.is_finite()), "features must be finite");
        let lp = self.log_probs(features, allowed);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for (i, &l) in lp.iter().enumerate() {
            if !allowed[i] {
                continue;
            }
            acc += l.exp();
            last = Some(i);
            if u < acc {
                return (i, l);
            }
        }
        let i = last.expect("at least one allowed action");
        (i, lp[i])
    }
}

/// Plays a [`ToyPolicy`] inside the episode loop.
#[derive(Debug, Clone, Copy)]
pub struct ToyAgent<'a> {
    pub policy: &'a ToyPolicy,
    pub max_edits: usize,
}

impl<'a> ToyAgent<'a> {
    pub fn new(policy: &'a ToyPolicy) -> Self {
        Self {
            policy,
            max_edits: 2 * policy.k,
        }
    }
}

fn judge_text(verdict: &Verdict) -> String {
    if verdict.satisfied {
        "all conditions satisfied".to_string()
    } else {
        format!("unmet: {}", verdict.deficiencies.join(", "))
    }
}

impl Policy for ToyAgent<'_> {
    fn respond(&self, ctx: &TurnContext<'_>, rng: &mut dyn RngCore) -> PolicyTurn {
        let clauses = ctx.query.constraints();
        let space = self.policy.actions();
        assert_eq!(clauses.len(), space.k, "query arity must match the policy");
        let last = ctx.last_round();
        let mut program = match last {
            Some(r) => PromptProgram::from_text(clauses, &r.prompt.text),
            None => PromptProgram {
                clauses: clauses.to_vec(),
                emphasis: vec![0; clauses.len()],
                verbosity: 0,
            },
        };
        let failed = failure_bits(clauses, last.map(|r| &r.verdict));
        let decision = ctx.rounds.len();
        let can_edit = !ctx.at_cap();

        let mut prefix = String::new();
        if let Some(r) = last {
            prefix.push_str(JUDGE_OPEN);
            prefix.push_str(&judge_text(&r.verdict));
            prefix.push_str(JUDGE_CLOSE);
        }
        prefix.push_str(THINK_OPEN);

        let mut tokens = Vec::new();
        let mut edits = 0;
        loop {
            let allowed: Vec<bool> = (0..space.size())
                .map(|i| match space.action(i) {
                    Action::Raise(j) => can_edit && edits < self.max_edits && program.emphasis[j] < MAX_EMPHASIS,
                    Action::Lower(j) => can_edit && edits < self.max_edits && program.emphasis[j] > 0,
                    Action::Submit => true,
                    Action::Terminate => decision > 0,
                })
                .collect();
            let features =
                reflective_state_features(self.policy.n_max, decision, &program.emphasis, &failed);
            let (idx, logprob) = self.policy.policy_step(&features, &allowed, rng);
            let mut text = std::mem::take(&mut prefix);
            let done = match space.action(idx) {
                Action::Raise(j) => {
                    program.emphasis[j] += 1;
                    text.push_str(&format!("raise {}; ", clauses[j]));
                    false
                }
                Action::Lower(j) => {
                    program.emphasis[j] -= 1;
                    text.push_str(&format!("lower {}; ", clauses[j]));
                    false
                }
                Action::Submit => {
                    text.push_str(THINK_CLOSE);
                    text.push_str(GENERATE_OPEN);
                    text.push_str(&program.render());
                    text.push_str(GENERATE_CLOSE);
                    true
                }
                Action::Terminate => {
                    text.push_str(THINK_CLOSE);
                    text.push_str(TERMINATE);
                    true
                }
            };
            edits += usize::from(!done);
            tokens.push(PolicyToken {
                text,
                sample: Some(SampleRecord {
                    features,
                    allowed,
                    action: idx,
                    logprob,
                }),
            });
            if done {
                break;
            }
        }
        PolicyTurn { tokens }
    }
}
