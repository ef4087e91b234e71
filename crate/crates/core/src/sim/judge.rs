use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::SimImage;
use super::program::parse_clauses;
use crate::agent::{Query, Verdict};
use crate::backends::{BackendError, Judge, JudgePointResult, PresentedChoice};

fn decode(backend: &str, bytes: &[u8]) -> Result<SimImage, BackendError> {
    SimImage::from_bytes(bytes).ok_or_else(|| BackendError::MalformedReply {
        backend: backend.to_string(),
        detail: "not a simulated image".into(),
    })
}

/// Conditions to check: the query's explicit constraints, or the clauses
/// found in its text when none are attached (as on the wire).
fn conditions(query: &Query) -> Vec<String> {
    match &query.constraints {
        Some(c) => c.clone(),
        None => parse_clauses(&query.text).into_iter().map(|(c, _)| c).collect(),
    }
}

fn unmet(query: &Query, image: &SimImage) -> Vec<String> {
    conditions(query)
        .into_iter()
        .filter(|c| !image.is_satisfied(c))
        .collect()
}

/// Exact judge over simulator ground truth. Strict: pass only when every
/// condition holds.
#[derive(Debug, Clone)]
pub struct OracleJudge {
    name: String,
}

impl OracleJudge {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into() }
    }
}

impl Default for OracleJudge {
    fn default() -> Self {
        Self::new("oracle")
    }
}

impl Judge for OracleJudge {
    fn name(&self) -> &str {
        &self.name
    }

    fn judge_point(
        &self,
        query: &Query,
        image: &[u8],
        _hints: &[String],
    ) -> Result<JudgePointResult, BackendError> {
        let img = decode(&self.name, image)?;
        let missing = unmet(query, &img);
        let total = conditions(query).len();
        Ok(if missing.is_empty() {
            JudgePointResult {
                pass: true,
                reasoning: format!("all {total} conditions satisfied"),
            }
        } else {
            JudgePointResult {
                pass: false,
                reasoning: format!("unmet: {}", missing.join(", ")),
            }
        })
    }

    fn compare(&self, first: &[u8], second: &[u8]) -> Result<PresentedChoice, BackendError> {
        let a = decode(&self.name, first)?.satisfied_count();
        let b = decode(&self.name, second)?.satisfied_count();
        Ok(match a.cmp(&b) {
            std::cmp::Ordering::Greater => PresentedChoice::First,
            std::cmp::Ordering::Less => PresentedChoice::Second,
            std::cmp::Ordering::Equal => PresentedChoice::Tie,
        })
    }

    fn inspect(&self, query: &Query, image: &[u8]) -> Result<Verdict, BackendError> {
        let missing = unmet(query, &decode(&self.name, image)?);
        Ok(if missing.is_empty() {
            Verdict::pass()
        } else {
            Verdict::fail(missing)
        })
    }
}

/// Oracle whose verdicts flip with a fixed probability. Draws come from one
/// seeded stream, so results depend on call order.
#[derive(Debug)]
pub struct NoisyOracleJudge {
    oracle: OracleJudge,
    flip_probability: f64,
    rng: Mutex<ChaCha8Rng>,
}

impl NoisyOracleJudge {
    pub fn new(name: impl Into<String>, flip_probability: f64, seed: u64) -> Result<Self, String> {
        if !(0.0..0.5).contains(&flip_probability) {
            return Err(format!(
                "flip probability must be in [0, 0.5), got {flip_probability}"
            ));
        }
        Ok(Self {
            oracle: OracleJudge::new(name),
            flip_probability,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    fn flip(&self) -> bool {
        self.rng.lock().expect("noisy judge rng poisoned").gen::<f64>() < self.flip_probability
    }
}

impl Judge for NoisyOracleJudge {
    fn name(&self) -> &str {
        self.oracle.name()
    }

    fn judge_point(
        &self,
        query: &Query,
        image: &[u8],
        hints: &[String],
    ) -> Result<JudgePointResult, BackendError> {
        let mut r = self.oracle.judge_point(query, image, hints)?;
        if self.flip() {
            r.pass = !r.pass;
            r.reasoning = format!("{} (overruled)", r.reasoning);
        }
        Ok(r)
    }

    fn compare(&self, first: &[u8], second: &[u8]) -> Result<PresentedChoice, BackendError> {
        let choice = self.oracle.compare(first, second)?;
        Ok(match (choice, self.flip()) {
            (PresentedChoice::First, true) => PresentedChoice::Second,
            (PresentedChoice::Second, true) => PresentedChoice::First,
            (c, _) => c,
        })
    }

    fn inspect(&self, query: &Query, image: &[u8]) -> Result<Verdict, BackendError> {
        let v = self.oracle.inspect(query, image)?;
        if !self.flip() {
            return Ok(v);
        }
        Ok(if v.satisfied {
            Verdict::fail(vec!["judge disagreement".into()])
        } else {
            Verdict::pass()
        })
    }
}

/// Mock judge that always prefers whichever image is presented first and
/// passes everything. Used to audit position debiasing.
#[derive(Debug, Default, Clone)]
pub struct PositionBiasedJudge;

impl Judge for PositionBiasedJudge {
    fn name(&self) -> &str {
        "position-biased"
    }

    fn judge_point(&self, _: &Query, _: &[u8], _: &[String]) -> Result<JudgePointResult, BackendError> {
        Ok(JudgePointResult {
            pass: true,
            reasoning: "looks fine".into(),
        })
    }

    fn compare(&self, _: &[u8], _: &[u8]) -> Result<PresentedChoice, BackendError> {
        Ok(PresentedChoice::First)
    }
}
