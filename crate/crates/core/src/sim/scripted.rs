//! Hand-written policies for tests, examples and oracle baselines.

use rand::RngCore;

use super::program::{PromptProgram, MAX_EMPHASIS};
use crate::agent::{render_turn, Policy, PolicyTurn, TurnContext};

/// Replays fixed outputs: `turns[i][attempt]` is emitted for decision i
/// (0 before the first image). The last entry of each list repeats.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    turns: Vec<Vec<String>>,
}

impl ScriptedPolicy {
    pub fn new(turns: Vec<Vec<String>>) -> Self {
        assert!(turns.iter().all(|t| !t.is_empty()), "each decision needs an output");
        Self { turns }
    }
}

impl Policy for ScriptedPolicy {
    fn respond(&self, ctx: &TurnContext<'_>, _rng: &mut dyn RngCore) -> PolicyTurn {
        let i = ctx.rounds.len().min(self.turns.len() - 1);
        let options = &self.turns[i];
        let j = (ctx.attempt as usize).min(options.len() - 1);
        PolicyTurn::from_text(options[j].clone())
    }
}

/// Keeps re-submitting the query text and never terminates.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverTerminatePolicy;

impl Policy for NeverTerminatePolicy {
    fn respond(&self, ctx: &TurnContext<'_>, _rng: &mut dyn RngCore) -> PolicyTurn {
        let judgment = ctx.last_round().map(|_| "try again");
        PolicyTurn::from_text(render_turn(judgment, Some("resubmit"), Some(&ctx.query.text)))
    }
}

/// Rule-based reflective agent: submits every clause at `initial` emphasis,
/// terminates once its verdict is satisfied, and otherwise raises the
/// emphasis of each failed clause by `step`.
#[derive(Debug, Clone, Copy)]
pub struct ReflectivePolicy {
    pub initial: u8,
    pub step: u8,
}

impl Default for ReflectivePolicy {
    fn default() -> Self {
        Self {
            initial: 0,
            step: 1,
        }
    }
}

impl Policy for ReflectivePolicy {
    fn respond(&self, ctx: &TurnContext<'_>, _rng: &mut dyn RngCore) -> PolicyTurn {
        let clauses = ctx.query.constraints();
        let Some(last) = ctx.last_round() else {
            let program = PromptProgram {
                clauses: clauses.to_vec(),
                emphasis: vec![self.initial.min(MAX_EMPHASIS); clauses.len()],
                verbosity: 0,
            };
            let text = render_turn(None, Some("rewrite the request"), Some(&program.render()));
            return PolicyTurn::from_text(text);
        };
        if last.verdict.satisfied {
            return PolicyTurn::from_text(render_turn(Some("all conditions satisfied"), None, None));
        }
        let judgment = format!("unmet: {}", last.verdict.deficiencies.join(", "));
        if ctx.at_cap() {
            return PolicyTurn::from_text(render_turn(Some(&judgment), None, None));
        }
        let mut program = PromptProgram::from_text(clauses, &last.prompt.text);
        for (c, e) in program.clauses.iter().zip(program.emphasis.iter_mut()) {
            if last.verdict.deficiencies.iter().any(|d| d == c) {
                *e = (*e + self.step).min(MAX_EMPHASIS);
            }
        }
        let text = render_turn(
            Some(&judgment),
            Some("emphasize the failed conditions"),
            Some(&program.render()),
        );
        PolicyTurn::from_text(text)
    }
}
