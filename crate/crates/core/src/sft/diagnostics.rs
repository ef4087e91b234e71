use serde::{Deserialize, Serialize};

use super::types::SftTrajectory;
use crate::agent::Trajectory;

/// What the diagnostics need from one trajectory of either kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosticRecord {
    pub tool_error: bool,
    pub query_words: usize,
    pub final_prompt_words: Option<usize>,
    pub first_pass: Option<bool>,
    pub final_pass: Option<bool>,
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

impl From<&Trajectory> for DiagnosticRecord {
    fn from(t: &Trajectory) -> Self {
        Self {
            tool_error: t.has_tool_error(),
            query_words: words(&t.query.text),
            final_prompt_words: t.final_prompt().map(|p| words(&p.text)),
            first_pass: t.rounds.first().map(|r| r.verdict.satisfied),
            final_pass: t.rounds.last().map(|r| r.verdict.satisfied),
        }
    }
}

impl From<&SftTrajectory> for DiagnosticRecord {
    fn from(t: &SftTrajectory) -> Self {
        Self {
            tool_error: false,
            query_words: words(&t.query.text),
            final_prompt_words: t.final_prompt().map(words),
            first_pass: t.rounds.first().and_then(|r| r.passed),
            final_pass: t.rounds.last().and_then(|r| r.passed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub trajectories: usize,
    /// Share of trajectories flagged with a malformed tool call.
    pub error_rate: f64,
    /// Share of trajectories with a final prompt whose word count exceeds
    /// the query's by at most 5.
    pub word_diff_leq5_rate: f64,
    /// Final-image pass rate minus first-image pass rate.
    pub reflection_improvement: f64,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn diagnostics<I>(records: I) -> Diagnostics
where
    I: IntoIterator<Item = DiagnosticRecord>,
{
    let (mut n, mut errors, mut prompted, mut short) = (0, 0, 0, 0);
    let (mut judged, mut first, mut last) = (0, 0, 0);
    for r in records {
        n += 1;
        errors += usize::from(r.tool_error);
        if let Some(w) = r.final_prompt_words {
            prompted += 1;
            short += usize::from(w as i64 - r.query_words as i64 <= 5);
        }
        if let (Some(a), Some(b)) = (r.first_pass, r.final_pass) {
            judged += 1;
            first += usize::from(a);
            last += usize::from(b);
        }
    }
    Diagnostics {
        trajectories: n,
        error_rate: rate(errors, n),
        word_diff_leq5_rate: rate(short, prompted),
        reflection_improvement: rate(last, judged) - rate(first, judged),
    }
}

impl Diagnostics {
    pub fn of_trajectories(ts: &[Trajectory]) -> Self {
        diagnostics(ts.iter().map(DiagnosticRecord::from))
    }

    pub fn of_corpus(ts: &[SftTrajectory]) -> Self {
        diagnostics(ts.iter().map(DiagnosticRecord::from))
    }

    /// Rates as percentages with two decimals.
    pub fn table(&self) -> String {
        format!(
            "trajectories            {}\nerror_rate              {:.2}%\nword_diff_leq5_rate     {:.2}%\nreflection_improvement  {:.2}%\n",
            self.trajectories,
            self.error_rate * 100.0,
            self.word_diff_leq5_rate * 100.0,
            self.reflection_improvement * 100.0
        )
    }
}
