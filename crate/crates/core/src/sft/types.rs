use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::{
    image_token_text, ImageRef, Query, Token, GENERATE_CLOSE, GENERATE_OPEN, JUDGE_CLOSE,
    JUDGE_OPEN, TERMINATE, THINK_CLOSE, THINK_OPEN,
};
use crate::backends::{BackendError, ImageStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Open,
    Synthetic,
}

/// A prompt considered for synthesis. Only candidates that fail all three
/// screening generations go on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolCandidate {
    pub id: String,
    pub prompt: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_image: Option<ImageRef>,
    #[serde(default)]
    pub fail_count: u8,
}

impl PoolCandidate {
    pub fn query(&self) -> Result<Query, crate::agent::ModelError> {
        Ok(Query::new(self.id.clone(), self.prompt.clone(), self.constraints.clone())?
            .with_hints(self.hints.clone()))
    }
}

/// On-disk pool entry: a candidate with its reference image inlined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub id: String,
    pub prompt: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_b64: Option<String>,
}

impl PoolRecord {
    pub fn into_candidate(self, store: &ImageStore) -> Result<PoolCandidate, BackendError> {
        let reference_image = match &self.reference_b64 {
            None => None,
            Some(b64) => {
                let bytes = crate::backends::http::b64_decode(b64)
                    .map_err(|e| BackendError::InvalidRequest(format!("{}: reference image: {e}", self.id)))?;
                Some(ImageRef {
                    handle: store.put(&bytes),
                    round: 0,
                    meta: BTreeMap::from([("role".to_string(), "reference".to_string())]),
                })
            }
        };
        Ok(PoolCandidate {
            id: self.id,
            prompt: self.prompt,
            source: self.source,
            constraints: self.constraints,
            hints: self.hints,
            reference_image,
            fail_count: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRound {
    pub reasoning: String,
    pub prompt: String,
    pub image: ImageRef,
    /// Teacher-written judgment of this round's image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<String>,
    /// Judge backend verdict used for routing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
}

/// Synthesized cold-start trajectory with at most two rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftTrajectory {
    pub id: String,
    pub source: Source,
    pub query: Query,
    pub rounds: Vec<SftRound>,
    /// Whether the last turn ends with the termination action.
    pub terminal: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tokens: Vec<Token>,
}

impl SftTrajectory {
    /// Token stream with loss masks: teacher-written turns are trained on,
    /// generated images are not. Screening rules and the hint image never
    /// appear.
    pub fn assemble_tokens(&self) -> Vec<Token> {
        let mut tokens = Vec::new();
        let mut pending_judgment: Option<&str> = None;
        for r in &self.rounds {
            let mut text = String::new();
            if let Some(j) = pending_judgment.take() {
                text.push_str(&format!("{JUDGE_OPEN}{j}{JUDGE_CLOSE}"));
            }
            text.push_str(&format!(
                "{THINK_OPEN}{}{THINK_CLOSE}{GENERATE_OPEN}{}{GENERATE_CLOSE}",
                r.reasoning, r.prompt
            ));
            tokens.push(Token::policy(text, None));
            tokens.push(Token::environment(image_token_text(&r.image)));
            pending_judgment = r.judgment.as_deref();
        }
        let mut last = String::new();
        if let Some(j) = pending_judgment {
            last.push_str(&format!("{JUDGE_OPEN}{j}{JUDGE_CLOSE}"));
        }
        if self.terminal {
            last.push_str(TERMINATE);
        }
        if !last.is_empty() {
            tokens.push(Token::policy(last, None));
        }
        tokens
    }

    pub fn finalize(mut self) -> Self {
        self.tokens = self.assemble_tokens();
        self
    }

    pub fn final_prompt(&self) -> Option<&str> {
        self.rounds.last().map(|r| r.prompt.as_str())
    }
}

/// Why a candidate left the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    /// Passed at least one screening generation.
    Solvable,
    Format,
    MalformedJudge,
    HintLeak,
    Pairwise,
    Pointwise,
    Inconsistent,
    MissingReference,
    NotSampled,
    /// Matches no sampling stratum.
    Unmatched,
    Backend(String),
}

impl Rejection {
    pub fn reason(&self) -> &'static str {
        match self {
            Rejection::Solvable => "solvable",
            Rejection::Format => "format",
            Rejection::MalformedJudge => "malformed-judge",
            Rejection::HintLeak => "hint-leak",
            Rejection::Pairwise => "pairwise",
            Rejection::Pointwise => "pointwise",
            Rejection::Inconsistent => "inconsistent",
            Rejection::MissingReference => "missing-reference",
            Rejection::NotSampled => "not-sampled",
            Rejection::Unmatched => "unmatched",
            Rejection::Backend(_) => "backend",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub input: usize,
    pub retained: usize,
    pub rejections: BTreeMap<String, usize>,
}

impl StageReport {
    pub fn new(stage: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            input: 0,
            retained: 0,
            rejections: BTreeMap::new(),
        }
    }

    pub fn keep(&mut self) {
        self.input += 1;
        self.retained += 1;
    }

    pub fn reject(&mut self, r: &Rejection) {
        self.input += 1;
        *self.rejections.entry(r.reason().to_string()).or_default() += 1;
    }

    pub fn rejected(&self) -> usize {
        self.rejections.values().sum()
    }

    /// Counts add up: retained + rejections = input.
    pub fn reconciles(&self) -> bool {
        self.retained <= self.input && self.retained + self.rejected() == self.input
    }

    /// Combines reports of the same stage computed over disjoint inputs.
    pub fn merge(mut self, other: &StageReport) -> Self {
        self.input += other.input;
        self.retained += other.retained;
        for (k, v) in &other.rejections {
            *self.rejections.entry(k.clone()).or_default() += v;
        }
        self
    }
}

/// Reports form a chain when each stage's input is the previous stage's
/// output and every report reconciles.
pub fn reports_telescope(reports: &[StageReport]) -> bool {
    reports.iter().all(StageReport::reconciles)
        && reports.windows(2).all(|w| w[0].retained == w[1].input)
}
