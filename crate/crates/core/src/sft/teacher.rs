//! Teacher prompts, reply parsing and a scripted mock teacher.
//!
//! The first message of every teacher request is a system message whose
//! first line names the task: `[rewrite]`, `[judge]` or `[reflect]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{render_turn, sanitize_body};
use crate::backends::http::b64_decode;
use crate::backends::{BackendError, Message, Teacher};
use crate::sim::{parse_clauses, PromptProgram, SimImage, MAX_EMPHASIS};

pub const REWRITE_TASK: &str = "[rewrite]";
pub const JUDGE_TASK: &str = "[judge]";
pub const REFLECT_TASK: &str = "[reflect]";

/// Default judging rules handed to the teacher. They are an input to
/// synthesis and never appear in the corpus.
pub const DEFAULT_RUBRIC: &str = "Rules: inspect every attribute named in the request. \
The image passes only if all of them are visibly satisfied; a single missing attribute is a fail. \
Answer exactly `verdict: pass` or `verdict: fail; unmet: <attr=value>, ...`.";

pub fn rewrite_messages(query: &str) -> Vec<Message> {
    vec![
        Message::new(
            "system",
            format!(
                "{REWRITE_TASK}\nRewrite the request into a prompt for an image generator. \
Reply as <think>reasoning</think><generate>prompt</generate>."
            ),
        ),
        Message::new("user", query),
    ]
}

pub fn judge_messages(query: &str, rubric: &str, image: &[u8]) -> Vec<Message> {
    vec![
        Message::new("system", format!("{JUDGE_TASK}\n{rubric}")),
        Message::new("user", format!("Request: {query}")).with_image(image),
    ]
}

/// Reflection request: the hint image is attached after the first-round
/// image.
pub fn reflect_messages(query: &str, prompt: &str, judgment: &str, image: &[u8], hint: &[u8]) -> Vec<Message> {
    vec![
        Message::new(
            "system",
            format!(
                "{REFLECT_TASK}\nThe previous prompt produced the first attached image, judged as shown. \
The second attached image shows a correct result; use it as guidance but never mention it. \
Reply as <think>reasoning</think><generate>prompt</generate>."
            ),
        ),
        Message::new(
            "user",
            format!("Request: {query}\nPrevious prompt: {prompt}\nJudgment: {judgment}"),
        )
        .with_image(image)
        .with_image(hint),
    ]
}

/// Parses `verdict: pass` / `verdict: fail; unmet: a, b`. Returns the
/// verdict and the listed deficiencies.
pub fn parse_verdict(text: &str) -> Option<(bool, Vec<String>)> {
    let t = text.trim();
    let rest = t.strip_prefix("verdict:")?.trim_start();
    if let Some(tail) = rest.strip_prefix("pass") {
        return tail.trim().is_empty().then(|| (true, Vec::new()));
    }
    let tail = rest.strip_prefix("fail")?.trim();
    if tail.is_empty() {
        return Some((false, Vec::new()));
    }
    let list = tail.strip_prefix(';')?.trim().strip_prefix("unmet:")?;
    let items = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    Some((false, items))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockTeacherConfig {
    /// Extra descriptive words appended to every prompt.
    pub verbosity: usize,
    /// Probability that a rewrite or reflection drops the tool-call tags.
    pub format_error_rate: f64,
    /// Probability that a reflection mentions the hint image.
    pub leak_rate: f64,
    /// Probability that a judgment states the wrong verdict.
    pub judge_flip: f64,
    pub seed: u64,
}

impl Default for MockTeacherConfig {
    fn default() -> Self {
        Self {
            verbosity: 0,
            format_error_rate: 0.0,
            leak_rate: 0.0,
            judge_flip: 0.0,
            seed: 0,
        }
    }
}

/// Scripted teacher over simulated images. Every reply is a pure function of
/// the request and the seed.
#[derive(Debug, Clone)]
pub struct MockTeacher {
    name: String,
    cfg: MockTeacherConfig,
}

impl MockTeacher {
    pub fn new(name: impl Into<String>, cfg: MockTeacherConfig) -> Result<Self, String> {
        for (what, p) in [
            ("format_error_rate", cfg.format_error_rate),
            ("leak_rate", cfg.leak_rate),
            ("judge_flip", cfg.judge_flip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{what} must be in [0, 1], got {p}"));
            }
        }
        Ok(Self {
            name: name.into(),
            cfg,
        })
    }

    fn rng(&self, messages: &[Message]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.cfg.seed.to_le_bytes());
        h.update(serde_json::to_vec(messages).expect("messages serialize"));
        let d = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&d);
        ChaCha8Rng::from_seed(seed)
    }

    fn malformed(&self, detail: &str) -> BackendError {
        BackendError::MalformedReply {
            backend: self.name.clone(),
            detail: detail.to_string(),
        }
    }

    fn images(&self, m: &Message) -> Result<Vec<SimImage>, BackendError> {
        m.images
            .iter()
            .map(|b| {
                let bytes = b64_decode(b).map_err(|e| self.malformed(&e))?;
                SimImage::from_bytes(&bytes).ok_or_else(|| self.malformed("attached image is not simulated"))
            })
            .collect()
    }

    fn program(&self, text: &str) -> PromptProgram {
        let found = parse_clauses(text);
        PromptProgram {
            clauses: found.iter().map(|(c, _)| c.clone()).collect(),
            emphasis: found.iter().map(|(_, e)| *e).collect(),
            verbosity: self.cfg.verbosity,
        }
    }

    fn reply(&self, reasoning: &str, prompt: &str, rng: &mut ChaCha8Rng) -> String {
        if rng.gen::<f64>() < self.cfg.format_error_rate {
            return format!("Reasoning: {reasoning}\nPrompt: {prompt}");
        }
        render_turn(None, Some(reasoning), Some(prompt))
    }

    fn rewrite(&self, user: &Message, rng: &mut ChaCha8Rng) -> String {
        let program = self.program(&user.content);
        let reasoning = format!(
            "the request names {} attributes; keep each of them explicit",
            program.clauses.len()
        );
        self.reply(&reasoning, &program.render(), rng)
    }

    fn judge(&self, user: &Message, rng: &mut ChaCha8Rng) -> Result<String, BackendError> {
        let image = self.images(user)?.into_iter().next().ok_or_else(|| self.malformed("no image"))?;
        let request = user.content.strip_prefix("Request: ").unwrap_or(&user.content);
        let unmet: Vec<String> = parse_clauses(request)
            .into_iter()
            .map(|(c, _)| c)
            .filter(|c| !image.is_satisfied(c))
            .collect();
        let mut pass = unmet.is_empty();
        if rng.gen::<f64>() < self.cfg.judge_flip {
            pass = !pass;
        }
        Ok(match (pass, unmet.is_empty()) {
            (true, _) => "verdict: pass".to_string(),
            (false, true) => "verdict: fail; unmet: overall fidelity".to_string(),
            (false, false) => format!("verdict: fail; unmet: {}", unmet.join(", ")),
        })
    }

    /// Strengthens every clause the hint satisfies but the first image
    /// missed.
    fn reflect(&self, user: &Message, rng: &mut ChaCha8Rng) -> Result<String, BackendError> {
        let images = self.images(user)?;
        let [first, hint] = images.as_slice() else {
            return Err(self.malformed("reflection needs the first image and the hint"));
        };
        let prev = user
            .content
            .lines()
            .find_map(|l| l.strip_prefix("Previous prompt: "))
            .ok_or_else(|| self.malformed("missing previous prompt"))?;
        let mut program = self.program(prev);
        let mut fixed = Vec::new();
        for (c, e) in program.clauses.iter().zip(program.emphasis.iter_mut()) {
            if hint.is_satisfied(c) && !first.is_satisfied(c) {
                *e = MAX_EMPHASIS;
                fixed.push(c.clone());
            }
        }
        let mut reasoning = if fixed.is_empty() {
            "the attributes look right; restate them more firmly".to_string()
        } else {
            format!("{} did not come through; emphasize them", fixed.join(", "))
        };
        let mut prompt = program.render();
        if rng.gen::<f64>() < self.cfg.leak_rate {
            if rng.gen::<bool>() {
                prompt.push_str(", matching the reference image");
            } else {
                reasoning.push_str(" as the hint image shows");
            }
        }
        Ok(self.reply(&reasoning, &prompt, rng))
    }
}

impl Teacher for MockTeacher {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, messages: &[Message]) -> Result<String, BackendError> {
        let mut rng = self.rng(messages);
        let task = messages
            .first()
            .and_then(|m| m.content.lines().next())
            .ok_or_else(|| self.malformed("empty request"))?;
        let user = messages.get(1).ok_or_else(|| self.malformed("missing user message"))?;
        let text = match task {
            REWRITE_TASK => self.rewrite(user, &mut rng),
            JUDGE_TASK => self.judge(user, &mut rng)?,
            REFLECT_TASK => self.reflect(user, &mut rng)?,
            other => return Err(self.malformed(&format!("unknown task {other}"))),
        };
        Ok(text)
    }
}

/// Strips grammar characters from a judge reply so it can sit inside a
/// judge block.
pub fn judgment_body(reply: &str) -> String {
    sanitize_body(reply.trim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{parse_tool_call, ToolCall};

    fn img(bits: &[bool]) -> Vec<u8> {
        SimImage {
            clauses: vec!["color=red".into(), "count=two".into(), "shape=cube".into()],
            satisfied: bits.to_vec(),
            seed: 0,
        }
        .to_bytes()
    }

    const Q: &str = "a scene with color=red, count=two, shape=cube";

    #[test]
    fn verdict_grammar() {
        assert_eq!(parse_verdict("verdict: pass"), Some((true, vec![])));
        assert_eq!(
            parse_verdict("verdict: fail; unmet: a=1, b=2"),
            Some((false, vec!["a=1".into(), "b=2".into()]))
        );
        assert_eq!(parse_verdict("verdict: fail"), Some((false, vec![])));
        assert_eq!(parse_verdict("looks good"), None);
        assert_eq!(parse_verdict("verdict: passable"), None);
    }

    #[test]
    fn identity_rewrite() {
        let t = MockTeacher::new("t", MockTeacherConfig::default()).unwrap();
        let reply = t.complete(&rewrite_messages(Q)).unwrap();
        match parse_tool_call(&reply) {
            ToolCall::Generate { prompt, .. } => assert_eq!(prompt, Q),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn verbose_rewrite_adds_words() {
        let cfg = MockTeacherConfig {
            verbosity: 7,
            ..Default::default()
        };
        let t = MockTeacher::new("t", cfg).unwrap();
        let ToolCall::Generate { prompt, .. } = parse_tool_call(&t.complete(&rewrite_messages(Q)).unwrap()) else {
            panic!()
        };
        assert_eq!(prompt.split_whitespace().count(), Q.split_whitespace().count() + 7);
    }

    #[test]
    fn format_errors_drop_tags() {
        let cfg = MockTeacherConfig {
            format_error_rate: 1.0,
            ..Default::default()
        };
        let t = MockTeacher::new("t", cfg).unwrap();
        let reply = t.complete(&rewrite_messages(Q)).unwrap();
        assert!(matches!(parse_tool_call(&reply), ToolCall::Failure(_)));
    }

    #[test]
    fn judge_reads_the_image() {
        let t = MockTeacher::new("t", MockTeacherConfig::default()).unwrap();
        let pass = t.complete(&judge_messages(Q, DEFAULT_RUBRIC, &img(&[true; 3]))).unwrap();
        assert_eq!(pass, "verdict: pass");
        let fail = t.complete(&judge_messages(Q, DEFAULT_RUBRIC, &img(&[true, false, true]))).unwrap();
        assert_eq!(fail, "verdict: fail; unmet: count=two");
    }

    #[test]
    fn reflection_emphasizes_missed_clauses() {
        let t = MockTeacher::new("t", MockTeacherConfig::default()).unwrap();
        let msgs = reflect_messages(Q, Q, "verdict: fail; unmet: count=two", &img(&[true, false, true]), &img(&[true; 3]));
        let ToolCall::Generate { prompt, reasoning, .. } = parse_tool_call(&t.complete(&msgs).unwrap()) else {
            panic!()
        };
        assert_eq!(prompt, "a scene with color=red, ((count=two)), shape=cube");
        assert!(reasoning.unwrap().contains("count=two"));
    }

    #[test]
    fn replies_are_pure_functions_of_the_request() {
        let cfg = MockTeacherConfig {
            format_error_rate: 0.5,
            seed: 9,
            ..Default::default()
        };
        let t = MockTeacher::new("t", cfg).unwrap();
        let a: Vec<String> = (0..20).map(|i| t.complete(&rewrite_messages(&format!("{Q} {i}"))).unwrap()).collect();
        let b: Vec<String> = (0..20).map(|i| t.complete(&rewrite_messages(&format!("{Q} {i}"))).unwrap()).collect();
        assert_eq!(a, b);
        assert!(MockTeacher::new("t", MockTeacherConfig { leak_rate: 1.5, ..cfg }).is_err());
    }
}
