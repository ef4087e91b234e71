//! Trajectory data model.
//!
//! A trajectory is the full interleaved record of one episode: per-round
//! reasoning, the refined prompt sent to the generator, the returned image,
//! the agent's judgment, and the optional termination action. Alongside the
//! structured rounds it keeps a flat token stream tagged by source, which is
//! what the trainer consumes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Invariant violations raised by the constructors in this module.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("query text must be non-empty")]
    EmptyQuery,
    #[error("constraint list must be non-empty when present")]
    EmptyConstraints,
    #[error("duplicate constraint `{0}`")]
    DuplicateConstraint(String),
    #[error("trajectory invariant violated: {0}")]
    Trajectory(String),
}

/// A user request, optionally carrying machine-checkable constraints.
///
/// `hints` are criteria hints for the reward judge; they are never shown to
/// the policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
}

impl Query {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        constraints: Option<Vec<String>>,
    ) -> Result<Self, ModelError> {
        let query = Self {
            id: id.into(),
            text: text.into(),
            constraints,
            hints: Vec::new(),
        };
        query.validate()?;
        Ok(query)
    }

    pub fn with_hints(mut self, hints: Vec<String>) -> Self {
        self.hints = hints;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.text.trim().is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        if let Some(constraints) = &self.constraints {
            if constraints.is_empty() {
                return Err(ModelError::EmptyConstraints);
            }
            let mut seen = std::collections::BTreeSet::new();
            for c in constraints {
                if !seen.insert(c.as_str()) {
                    return Err(ModelError::DuplicateConstraint(c.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn constraints(&self) -> &[String] {
        self.constraints.as_deref().unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThoughtKind {
    Reason,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThoughtStep {
    pub kind: ThoughtKind,
    pub text: String,
    pub round: u32,
}

/// A prompt in tool-callable form, as extracted from policy output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedPrompt {
    pub text: String,
    pub round: u32,
    pub well_formed: bool,
}

/// Opaque reference to a generated image. `handle` is the lowercase hex
/// SHA-256 of the image bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub handle: String,
    pub round: u32,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

/// Judgment outcome. `deficiencies` is empty iff `satisfied`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub satisfied: bool,
    pub deficiencies: Vec<String>,
}

impl Verdict {
    pub fn pass() -> Self {
        Self {
            satisfied: true,
            deficiencies: Vec::new(),
        }
    }

    /// A failing verdict. An empty list is replaced by a generic entry so the
    /// invariant holds.
    pub fn fail(mut deficiencies: Vec<String>) -> Self {
        if deficiencies.is_empty() {
            deficiencies.push("unspecified deficiency".to_string());
        }
        Self {
            satisfied: false,
            deficiencies,
        }
    }
}

/// One think, invoke, judge cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub reason: ThoughtStep,
    pub prompt: RefinedPrompt,
    pub image: ImageRef,
    pub judgment: ThoughtStep,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenSource {
    Policy,
    Environment,
}

/// Sampling record for a policy token: enough to recompute its probability
/// under updated parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub features: Vec<f64>,
    pub allowed: Vec<bool>,
    pub action: usize,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub source: TokenSource,
    /// 1 for policy tokens (trained on), 0 for environment tokens.
    pub loss_mask: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleRecord>,
}

impl Token {
    pub fn policy(text: impl Into<String>, sample: Option<SampleRecord>) -> Self {
        Self {
            text: text.into(),
            source: TokenSource::Policy,
            loss_mask: 1,
            sample,
        }
    }

    pub fn environment(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source: TokenSource::Environment,
            loss_mask: 0,
            sample: None,
        }
    }

    pub fn is_policy(&self) -> bool {
        self.source == TokenSource::Policy
    }
}

/// Why an episode ended without a usable continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToolError {
    /// Policy output could not be parsed after the configured retries.
    MalformedToolCall { span: (usize, usize), reason: String },
    /// A backend failed and the episode recorded it instead of aborting.
    BackendFailure { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub query: Query,
    pub rounds: Vec<Round>,
    pub terminated: bool,
    pub n: usize,
    pub token_stream: Vec<Token>,
    /// Number of policy outputs that failed to parse, including retried ones.
    #[serde(default)]
    pub parse_failures: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_error: Option<ToolError>,
    #[serde(default)]
    pub seed: u64,
}

impl Trajectory {
    pub fn final_image(&self) -> Option<&ImageRef> {
        self.rounds.last().map(|r| &r.image)
    }

    pub fn final_prompt(&self) -> Option<&RefinedPrompt> {
        self.rounds.last().map(|r| &r.prompt)
    }

    pub fn has_tool_error(&self) -> bool {
        matches!(self.tool_error, Some(ToolError::MalformedToolCall { .. }))
    }

    /// Policy tokens and environment tokens interleaved in order.
    pub fn transcript(&self) -> String {
        self.token_stream.iter().map(|t| t.text.as_str()).collect()
    }

    pub fn policy_tokens(&self) -> impl Iterator<Item = &Token> {
        self.token_stream.iter().filter(|t| t.is_policy())
    }

    /// Checks the structural invariants for a trajectory produced with the
    /// given round cap.
    pub fn check_invariants(&self, n_max: usize) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Trajectory(msg));
        if self.n != self.rounds.len() {
            return fail(format!("n={} but {} rounds", self.n, self.rounds.len()));
        }
        if self.n > n_max {
            return fail(format!("n={} exceeds n_max={n_max}", self.n));
        }
        if self.n == 0 && self.tool_error.is_none() {
            return fail("no completed round without a recorded tool error".into());
        }
        if !self.terminated && self.n < n_max && self.tool_error.is_none() {
            return fail(format!("stopped at n={} without termination or error", self.n));
        }
        let mut handles = std::collections::BTreeSet::new();
        for (i, round) in self.rounds.iter().enumerate() {
            let idx = i as u32 + 1;
            if round.reason.round != idx || round.prompt.round != idx || round.image.round != idx {
                return fail(format!("round {idx} carries mismatched round labels"));
            }
            if round.reason.kind != ThoughtKind::Reason || round.judgment.kind != ThoughtKind::Judge {
                return fail(format!("round {idx} has misordered thought kinds"));
            }
            if round.verdict.satisfied != round.verdict.deficiencies.is_empty() {
                return fail(format!("round {idx} verdict is inconsistent"));
            }
            if !handles.insert(round.image.handle.as_str()) {
                return fail(format!("duplicate image handle in round {idx}"));
            }
        }
        for t in &self.token_stream {
            let expected = u8::from(t.is_policy());
            if t.loss_mask != expected {
                return fail("loss mask disagrees with token source".into());
            }
            if !t.is_policy() && t.sample.is_some() {
                return fail("environment token carries a sampling record".into());
            }
        }
        Ok(())
    }
}

/// Number of interaction rounds, i.e. generated images. Used as the bucket
/// key by the round resampler.
pub fn trajectory_round_count(t: &Trajectory) -> usize {
    t.rounds.len()
}
