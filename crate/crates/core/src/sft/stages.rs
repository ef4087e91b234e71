use serde::{Deserialize, Serialize};

use super::teacher::{judge_messages, judgment_body, parse_verdict, reflect_messages, rewrite_messages};
use super::types::{PoolCandidate, Rejection, SftRound, SftTrajectory, StageReport};
use super::SftError;
use crate::agent::{parse_tool_call, ImageRef, Query, RefinedPrompt, ToolCall};
use crate::backends::{
    generate, judge_pair, judge_point, BackendError, ImageGenerator, ImageStore, Judge, Message,
    PairWinner, Teacher,
};
use crate::seed::{derive_seed, label, rng_for};

pub const SCREEN_ATTEMPTS: u64 = 3;

/// Case-insensitive phrase screen for text that points at the hint image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintLeakScreen {
    pub phrases: Vec<String>,
}

impl Default for HintLeakScreen {
    fn default() -> Self {
        Self {
            phrases: ["reference image", "hint image", "provided image", "example image"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl HintLeakScreen {
    /// First listed phrase found in `text`.
    pub fn find(&self, text: &str) -> Option<&str> {
        let lower = text.to_lowercase();
        self.phrases
            .iter()
            .find(|p| lower.contains(&p.to_lowercase()))
            .map(String::as_str)
    }
}

fn teacher_call(teacher: &dyn Teacher, messages: &[Message]) -> Result<Result<String, Rejection>, SftError> {
    match teacher.complete(messages) {
        Ok(text) => Ok(Ok(text)),
        Err(BackendError::MalformedReply { .. }) => Ok(Err(Rejection::Format)),
        Err(e) => Err(SftError::TeacherUnavailable(e.to_string())),
    }
}

fn backend_rejection(e: BackendError) -> Rejection {
    Rejection::Backend(e.to_string())
}

fn stage_seed(seed: u64, id: &str, stage: &str, k: u64) -> u64 {
    derive_seed(seed, &[label(id), label(stage), k])
}

/// Screens one candidate: three generations of its prompt with distinct
/// seeds, each judged pointwise. Returns the candidate with its fail count,
/// or the rejection.
pub fn screen_candidate(
    candidate: &PoolCandidate,
    generator: &dyn ImageGenerator,
    judge: &dyn Judge,
    store: &ImageStore,
    seed: u64,
) -> Result<PoolCandidate, Rejection> {
    let query = candidate
        .query()
        .map_err(|e| Rejection::Backend(e.to_string()))?;
    let prompt = RefinedPrompt {
        text: candidate.prompt.clone(),
        round: 1,
        well_formed: true,
    };
    let mut fails = 0u8;
    for attempt in 0..SCREEN_ATTEMPTS {
        let s = stage_seed(seed, &candidate.id, "screen", attempt);
        let image = generate(generator, store, &prompt, s).map_err(backend_rejection)?;
        let r = judge_point(judge, store, &query, &image, &query.hints).map_err(backend_rejection)?;
        fails += u8::from(!r.pass);
    }
    if u64::from(fails) < SCREEN_ATTEMPTS {
        return Err(Rejection::Solvable);
    }
    Ok(PoolCandidate {
        fail_count: fails,
        ..candidate.clone()
    })
}

/// Keeps the candidates that fail every screening generation.
pub fn filter_pool(
    candidates: &[PoolCandidate],
    generator: &dyn ImageGenerator,
    judge: &dyn Judge,
    store: &ImageStore,
    seed: u64,
) -> (Vec<PoolCandidate>, StageReport) {
    let mut report = StageReport::new("pool_filter");
    let mut kept = Vec::new();
    for c in candidates {
        match screen_candidate(c, generator, judge, store, seed) {
            Ok(c) => {
                report.keep();
                kept.push(c);
            }
            Err(r) => {
                if let Rejection::Backend(msg) = &r {
                    log::warn!("candidate {} dropped: {msg}", c.id);
                }
                report.reject(&r);
            }
        }
    }
    (kept, report)
}

fn parse_generation(reply: &str) -> Result<(String, String), Rejection> {
    match parse_tool_call(reply) {
        ToolCall::Generate {
            reasoning: Some(reasoning),
            prompt,
            judgment: None,
        } => Ok((reasoning, prompt)),
        _ => Err(Rejection::Format),
    }
}

/// Teacher rewrite of the candidate prompt into (T1, P1), then I1.
pub fn synthesize_round_one(
    candidate: &PoolCandidate,
    teacher: &dyn Teacher,
    generator: &dyn ImageGenerator,
    store: &ImageStore,
    seed: u64,
) -> Result<Result<SftTrajectory, Rejection>, SftError> {
    let query = match candidate.query() {
        Ok(q) => q,
        Err(e) => return Ok(Err(Rejection::Backend(e.to_string()))),
    };
    let reply = match teacher_call(teacher, &rewrite_messages(&query.text))? {
        Ok(r) => r,
        Err(r) => return Ok(Err(r)),
    };
    let (reasoning, prompt) = match parse_generation(&reply) {
        Ok(x) => x,
        Err(r) => return Ok(Err(r)),
    };
    let refined = RefinedPrompt {
        text: prompt.clone(),
        round: 1,
        well_formed: true,
    };
    let image = match generate(generator, store, &refined, stage_seed(seed, &candidate.id, "round", 1)) {
        Ok(i) => i,
        Err(e) => return Ok(Err(backend_rejection(e))),
    };
    Ok(Ok(SftTrajectory {
        id: candidate.id.clone(),
        source: candidate.source,
        query,
        rounds: vec![SftRound {
            reasoning,
            prompt,
            image,
            judgment: None,
            passed: None,
        }],
        terminal: false,
        tokens: Vec::new(),
    }))
}

/// Outcome of judging a round-one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    /// The image passes; the trajectory ends with termination.
    Terminal(SftTrajectory),
    /// The image fails; the trajectory goes on to reflection.
    Continue(SftTrajectory),
}

impl Branch {
    pub fn trajectory(&self) -> &SftTrajectory {
        match self {
            Branch::Terminal(t) | Branch::Continue(t) => t,
        }
    }
}

fn teacher_judgment(
    teacher: &dyn Teacher,
    query: &Query,
    rubric: &str,
    bytes: &[u8],
) -> Result<Result<String, Rejection>, SftError> {
    let reply = match teacher_call(teacher, &judge_messages(&query.text, rubric, bytes))? {
        Ok(r) => r,
        Err(_) => return Ok(Err(Rejection::MalformedJudge)),
    };
    let body = judgment_body(&reply);
    if parse_verdict(&body).is_none() {
        return Ok(Err(Rejection::MalformedJudge));
    }
    Ok(Ok(body))
}

/// The teacher writes J1 under the rubric; the judge backend's pointwise
/// verdict on I1 decides the branch.
pub fn synthesize_judgment(
    partial: SftTrajectory,
    teacher: &dyn Teacher,
    judge: &dyn Judge,
    store: &ImageStore,
    rubric: &str,
) -> Result<Result<Branch, Rejection>, SftError> {
    let mut t = partial;
    let last = t.rounds.last().expect("round one present").image.clone();
    let bytes = match store.get(&last.handle) {
        Ok(b) => b,
        Err(e) => return Ok(Err(backend_rejection(e))),
    };
    let judgment = match teacher_judgment(teacher, &t.query, rubric, &bytes)? {
        Ok(j) => j,
        Err(r) => return Ok(Err(r)),
    };
    let pass = match judge_point(judge, store, &t.query, &last, &t.query.hints) {
        Ok(r) => r.pass,
        Err(e) => return Ok(Err(backend_rejection(e))),
    };
    let round = t.rounds.last_mut().expect("round one present");
    round.judgment = Some(judgment);
    round.passed = Some(pass);
    Ok(Ok(if pass {
        t.terminal = true;
        Branch::Terminal(t)
    } else {
        Branch::Continue(t)
    }))
}

/// Backends and settings for the reflection step.
#[derive(Clone, Copy)]
pub struct ReflectionContext<'a> {
    pub teacher: &'a dyn Teacher,
    pub generator: &'a dyn ImageGenerator,
    pub judge: &'a dyn Judge,
    pub store: &'a ImageStore,
    pub screen: &'a HintLeakScreen,
    pub rubric: &'a str,
    /// Keep second rounds that beat the first image but still fail, as
    /// non-terminal trajectories.
    pub keep_non_terminal: bool,
    pub seed: u64,
}

/// Hint-guided second round: the teacher refines the prompt with the hint
/// image in view, leaks are screened out, I2 is generated and must beat I1
/// pairwise, and the pointwise verdict on I2 decides whether the trajectory
/// terminates.
pub fn synthesize_reflection(
    partial: SftTrajectory,
    hint: &ImageRef,
    ctx: &ReflectionContext<'_>,
) -> Result<Result<SftTrajectory, Rejection>, SftError> {
    let mut t = partial;
    let first = t.rounds[0].clone();
    let (first_bytes, hint_bytes) = match (ctx.store.get(&first.image.handle), ctx.store.get(&hint.handle)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Ok(Err(backend_rejection(e))),
    };
    let judgment = first.judgment.as_deref().unwrap_or_default();
    let msgs = reflect_messages(&t.query.text, &first.prompt, judgment, &first_bytes, &hint_bytes);
    let reply = match teacher_call(ctx.teacher, &msgs)? {
        Ok(r) => r,
        Err(r) => return Ok(Err(r)),
    };
    let (reasoning, prompt) = match parse_generation(&reply) {
        Ok(x) => x,
        Err(r) => return Ok(Err(r)),
    };
    if ctx.screen.find(&reasoning).or_else(|| ctx.screen.find(&prompt)).is_some() {
        return Ok(Err(Rejection::HintLeak));
    }
    let refined = RefinedPrompt {
        text: prompt.clone(),
        round: 2,
        well_formed: true,
    };
    let image = match generate(ctx.generator, ctx.store, &refined, stage_seed(ctx.seed, &t.id, "round", 2)) {
        Ok(i) => i,
        Err(e) => return Ok(Err(backend_rejection(e))),
    };
    let mut rng = rng_for(stage_seed(ctx.seed, &t.id, "pair", 2), &[]);
    match judge_pair(ctx.judge, ctx.store, &first.image, &image, &mut rng) {
        Ok(r) if r.winner == PairWinner::Second => {}
        Ok(_) => return Ok(Err(Rejection::Pairwise)),
        Err(e) => return Ok(Err(backend_rejection(e))),
    }
    let pass = match judge_point(ctx.judge, ctx.store, &t.query, &image, &t.query.hints) {
        Ok(r) => r.pass,
        Err(e) => return Ok(Err(backend_rejection(e))),
    };
    if !pass && !ctx.keep_non_terminal {
        return Ok(Err(Rejection::Pointwise));
    }
    let bytes = match ctx.store.get(&image.handle) {
        Ok(b) => b,
        Err(e) => return Ok(Err(backend_rejection(e))),
    };
    let judgment = match teacher_judgment(ctx.teacher, &t.query, ctx.rubric, &bytes)? {
        Ok(j) => j,
        Err(r) => return Ok(Err(r)),
    };
    t.rounds.push(SftRound {
        reasoning,
        prompt,
        image,
        judgment: Some(judgment),
        passed: Some(pass),
    });
    t.terminal = pass;
    Ok(Ok(t))
}

/// Judgment text must agree with how the trajectory continues: every round
/// but the last is judged a fail, and the last round is judged a pass
/// exactly when the trajectory terminates.
pub fn check_consistency(t: &SftTrajectory) -> Result<(), Rejection> {
    let n = t.rounds.len();
    if n == 0 {
        return Err(Rejection::Inconsistent);
    }
    for (i, r) in t.rounds.iter().enumerate() {
        let verdict = r
            .judgment
            .as_deref()
            .and_then(parse_verdict)
            .ok_or(Rejection::Inconsistent)?;
        let expected = i + 1 == n && t.terminal;
        if verdict.0 != expected {
            return Err(Rejection::Inconsistent);
        }
    }
    Ok(())
}
