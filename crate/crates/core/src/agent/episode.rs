//! The think, invoke, judge, reflect loop.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::toolcall::{extract_judgment, parse_tool_call, ParseFailure, ToolCall};
use super::trajectory::{
    ImageRef, Query, RefinedPrompt, Round, SampleRecord, ThoughtKind, ThoughtStep, Token,
    ToolError, Trajectory, Verdict,
};
use crate::backends::{self, BackendError, ImageGenerator, ImageStore, Judge};
use crate::seed::{derive_seed, rng_for};

/// What the policy sees when asked for its next turn.
#[derive(Debug, Clone, Copy)]
pub struct TurnContext<'a> {
    pub query: &'a Query,
    pub rounds: &'a [Round],
    pub n_max: usize,
    /// 0 on the first try, incremented on each re-sample after a parse failure.
    pub attempt: u32,
}

impl TurnContext<'_> {
    /// 1-based index of the round a tool call from this turn would start.
    pub fn next_round(&self) -> usize {
        self.rounds.len() + 1
    }

    /// True when a tool call from this turn would exceed the round cap.
    pub fn at_cap(&self) -> bool {
        self.rounds.len() >= self.n_max
    }

    pub fn last_round(&self) -> Option<&Round> {
        self.rounds.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyToken {
    pub text: String,
    pub sample: Option<SampleRecord>,
}

/// One policy response, as a sequence of emitted tokens.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyTurn {
    pub tokens: Vec<PolicyToken>,
}

impl PolicyTurn {
    /// A turn emitted as a single untracked token.
    pub fn from_text(text: impl Into<String>) -> Self {
        Self {
            tokens: vec![PolicyToken {
                text: text.into(),
                sample: None,
            }],
        }
    }

    pub fn text(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

/// Anything that can play the agent: a scripted mock, a hand-coded rule or a
/// trainable policy. Implementations must be deterministic given the rng.
pub trait Policy: Sync {
    fn respond(&self, ctx: &TurnContext<'_>, rng: &mut dyn RngCore) -> PolicyTurn;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendFailureMode {
    /// Abort the episode with an error.
    #[default]
    Propagate,
    /// End the episode and record the failure on the trajectory.
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub n_max: usize,
    /// Re-samples allowed after a malformed tool call.
    pub max_retries: u32,
    pub seed: u64,
    #[serde(default)]
    pub on_backend_failure: BackendFailureMode,
}

impl EpisodeConfig {
    pub fn new(n_max: usize, seed: u64) -> Self {
        Self {
            n_max,
            max_retries: 1,
            seed,
            on_backend_failure: BackendFailureMode::Propagate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error("n_max must be at least 1")]
    InvalidRoundCap,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Tag text for an image observation in the token stream.
pub fn image_token_text(image: &ImageRef) -> String {
    format!("<image handle=\"{}\"/>", image.handle)
}

/// Runs one episode to termination, the round cap, or an unrecoverable tool
/// error.
///
/// After the cap is reached the policy still gets one turn so it can judge
/// the last image; a tool call in that turn is recorded but not executed.
pub fn run_episode(
    query: &Query,
    policy: &dyn Policy,
    generator: &dyn ImageGenerator,
    judge: &dyn Judge,
    store: &ImageStore,
    cfg: &EpisodeConfig,
) -> Result<Trajectory, EpisodeError> {
    if cfg.n_max == 0 {
        return Err(EpisodeError::InvalidRoundCap);
    }
    let mut rng = rng_for(cfg.seed, &[0x706f_6c69_6379]);
    let mut rounds: Vec<Round> = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut parse_failures = 0u32;
    let mut tool_error = None;
    let mut terminated = false;
    let mut attempt = 0u32;

    loop {
        let ctx = TurnContext {
            query,
            rounds: &rounds,
            n_max: cfg.n_max,
            attempt,
        };
        let turn = policy.respond(&ctx, &mut rng);
        let raw = turn.text();
        tokens.extend(
            turn.tokens
                .into_iter()
                .map(|t| Token::policy(t.text, t.sample)),
        );

        let call = match parse_tool_call(&raw) {
            ToolCall::Terminate { .. } if rounds.is_empty() => ToolCall::Failure(ParseFailure {
                span: (0, raw.len()),
                reason: "termination before any image".into(),
            }),
            other => other,
        };

        if let Some(last) = rounds.last_mut() {
            let judged = match &call {
                ToolCall::Failure(_) => extract_judgment(&raw),
                ok => ok.judgment().map(str::to_string),
            };
            if let Some(text) = judged {
                last.judgment.text = text;
            }
        }

        match call {
            ToolCall::Failure(failure) => {
                parse_failures += 1;
                if attempt < cfg.max_retries {
                    attempt += 1;
                    continue;
                }
                tool_error = Some(ToolError::MalformedToolCall {
                    span: failure.span,
                    reason: failure.reason,
                });
                break;
            }
            ToolCall::Terminate { .. } => {
                terminated = true;
                break;
            }
            ToolCall::Generate {
                reasoning, prompt, ..
            } => {
                if rounds.len() >= cfg.n_max {
                    break;
                }
                attempt = 0;
                let round = rounds.len() as u32 + 1;
                let prompt = RefinedPrompt {
                    text: prompt,
                    round,
                    well_formed: true,
                };
                let image_seed = derive_seed(cfg.seed, &[0x0069_6d61_6765, u64::from(round)]);
                let observed = backends::generate(generator, store, &prompt, image_seed).and_then(|image| {
                    let bytes = store.get(&image.handle)?;
                    let verdict = judge.inspect(query, &bytes)?;
                    Ok((image, verdict))
                });
                let (image, verdict) = match observed {
                    Ok(ok) => ok,
                    Err(e) => match cfg.on_backend_failure {
                        BackendFailureMode::Propagate => return Err(e.into()),
                        BackendFailureMode::Record => {
                            tool_error = Some(ToolError::BackendFailure {
                                message: e.to_string(),
                            });
                            break;
                        }
                    },
                };
                tokens.push(Token::environment(image_token_text(&image)));
                rounds.push(Round {
                    reason: ThoughtStep {
                        kind: ThoughtKind::Reason,
                        text: reasoning.unwrap_or_default(),
                        round,
                    },
                    prompt,
                    image,
                    judgment: ThoughtStep {
                        kind: ThoughtKind::Judge,
                        text: String::new(),
                        round,
                    },
                    verdict: Verdict {
                        satisfied: verdict.satisfied,
                        deficiencies: verdict.deficiencies,
                    },
                });
            }
        }
    }

    Ok(Trajectory {
        query: query.clone(),
        n: rounds.len(),
        rounds,
        terminated,
        token_stream: tokens,
        parse_failures,
        tool_error,
        seed: cfg.seed,
    })
}
