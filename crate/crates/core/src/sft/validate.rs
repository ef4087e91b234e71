//! Corpus screens that can be re-run on finished output.

use serde::{Deserialize, Serialize};

use super::stages::{check_consistency, HintLeakScreen};
use super::types::{SftTrajectory, StageReport};
use crate::agent::{image_token_text, TokenSource};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub rule: String,
    pub detail: String,
}

fn violation(t: &SftTrajectory, rule: &str, detail: impl Into<String>) -> Violation {
    Violation {
        id: t.id.clone(),
        rule: rule.to_string(),
        detail: detail.into(),
    }
}

/// Environment tokens are exactly the generated images and carry mask 0;
/// everything else is a policy token with mask 1.
pub fn check_masks(t: &SftTrajectory) -> Vec<Violation> {
    let images: Vec<String> = t.rounds.iter().map(|r| image_token_text(&r.image)).collect();
    let mut out = Vec::new();
    for (i, tok) in t.tokens.iter().enumerate() {
        let expected = u8::from(tok.source == TokenSource::Policy);
        if tok.loss_mask != expected {
            out.push(violation(t, "mask", format!("token {i} has mask {}", tok.loss_mask)));
        }
        let is_image = images.contains(&tok.text);
        if is_image != (tok.source == TokenSource::Environment) {
            out.push(violation(t, "mask", format!("token {i} source {:?} does not match its content", tok.source)));
        }
    }
    if t.tokens.is_empty() {
        out.push(violation(t, "mask", "no tokens"));
    }
    out
}

pub fn check_hint_leak(t: &SftTrajectory, screen: &HintLeakScreen) -> Vec<Violation> {
    t.tokens
        .iter()
        .filter_map(|tok| screen.find(&tok.text))
        .map(|p| violation(t, "hint-leak", format!("mentions {p:?}")))
        .collect()
}

/// The judging rules are an input to synthesis; no line of them may appear
/// in the corpus.
pub fn check_rubric_absent(t: &SftTrajectory, rubric: &str) -> Vec<Violation> {
    let text: String = t.tokens.iter().map(|x| x.text.as_str()).collect();
    rubric
        .split(['.', '\n'])
        .map(str::trim)
        .filter(|s| s.len() >= 16 && text.contains(*s))
        .map(|s| violation(t, "rubric", format!("contains {s:?}")))
        .collect()
}

pub fn check_structure(t: &SftTrajectory) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(1..=2).contains(&t.rounds.len()) {
        out.push(violation(t, "structure", format!("{} rounds", t.rounds.len())));
    }
    if check_consistency(t).is_err() {
        out.push(violation(t, "consistency", "judgment contradicts the routing"));
    }
    if t.tokens != t.assemble_tokens() {
        out.push(violation(t, "structure", "tokens do not match the rounds"));
    }
    out
}

/// Every screen over every record.
pub fn validate_corpus(corpus: &[SftTrajectory], screen: &HintLeakScreen, rubric: &str) -> Vec<Violation> {
    corpus
        .iter()
        .flat_map(|t| {
            let mut v = check_masks(t);
            v.extend(check_hint_leak(t, screen));
            v.extend(check_rubric_absent(t, rubric));
            v.extend(check_structure(t));
            v
        })
        .collect()
}

pub fn validate_reports(reports: &[StageReport]) -> Vec<Violation> {
    let mut out = Vec::new();
    for r in reports {
        if !r.reconciles() {
            out.push(Violation {
                id: r.stage.clone(),
                rule: "report".into(),
                detail: format!("input {} != retained {} + rejected {}", r.input, r.retained, r.rejected()),
            });
        }
    }
    for w in reports.windows(2) {
        if w[0].retained != w[1].input {
            out.push(Violation {
                id: w[1].stage.clone(),
                rule: "report".into(),
                detail: format!("input {} but {} retained {}", w[1].input, w[0].stage, w[0].retained),
            });
        }
    }
    out
}
