//! In-process server for the wire protocol.
//!
//! Serves requests from local backend implementations without a network.
//! Wrapping it in a [`RecordingTransport`](super::replay::RecordingTransport)
//! records a session against any backend kind, simulated ones included.

use std::sync::Arc;

use serde_json::Value;

use super::http::{
    b64_decode, b64_encode, GenerateRequest, GenerateResponse, JudgePairRequest,
    JudgePairResponse, JudgePointRequest, JudgePointResponse, TeacherRequest, TeacherResponse,
    GENERATE_PATH, JUDGE_PAIR_PATH, JUDGE_POINT_PATH, TEACHER_PATH,
};
use super::transport::Transport;
use super::{BackendError, ImageGenerator, Judge, PresentedChoice, Teacher};
use crate::agent::Query;

#[derive(Default, Clone)]
pub struct InProcessServer {
    pub generator: Option<Arc<dyn ImageGenerator>>,
    pub judge: Option<Arc<dyn Judge>>,
    pub teacher: Option<Arc<dyn Teacher>>,
}

impl InProcessServer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_generator(mut self, g: Arc<dyn ImageGenerator>) -> Self {
        self.generator = Some(g);
        self
    }

    pub fn with_judge(mut self, j: Arc<dyn Judge>) -> Self {
        self.judge = Some(j);
        self
    }

    pub fn with_teacher(mut self, t: Arc<dyn Teacher>) -> Self {
        self.teacher = Some(t);
        self
    }

    fn missing(&self, what: &str) -> BackendError {
        BackendError::Unavailable {
            backend: "in-process".into(),
            attempts: 1,
            message: format!("no {what} mounted"),
        }
    }
}

fn bad_request(detail: impl ToString) -> BackendError {
    BackendError::InvalidRequest(detail.to_string())
}

fn parse<T: for<'de> serde::Deserialize<'de>>(body: &Value) -> Result<T, BackendError> {
    serde_json::from_value(body.clone()).map_err(bad_request)
}

fn reply<T: serde::Serialize>(r: T) -> Result<Value, BackendError> {
    Ok(serde_json::to_value(r).expect("reply serializes"))
}

impl Transport for InProcessServer {
    fn name(&self) -> &str {
        "in-process"
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        match path {
            GENERATE_PATH => {
                let g = self.generator.as_ref().ok_or_else(|| self.missing("generator"))?;
                let req: GenerateRequest = parse(body)?;
                let img = g.generate(&req.prompt, req.seed)?;
                reply(GenerateResponse {
                    image_b64: b64_encode(&img.bytes),
                    model: img.model,
                })
            }
            JUDGE_POINT_PATH => {
                let j = self.judge.as_ref().ok_or_else(|| self.missing("judge"))?;
                let req: JudgePointRequest = parse(body)?;
                let image = b64_decode(&req.image_b64).map_err(bad_request)?;
                let query = Query {
                    id: String::new(),
                    text: req.prompt,
                    constraints: None,
                    hints: Vec::new(),
                };
                let r = j.judge_point(&query, &image, &req.hints)?;
                reply(JudgePointResponse {
                    pass: r.pass,
                    reasoning: r.reasoning,
                })
            }
            JUDGE_PAIR_PATH => {
                let j = self.judge.as_ref().ok_or_else(|| self.missing("judge"))?;
                let req: JudgePairRequest = parse(body)?;
                let a = b64_decode(&req.image_a_b64).map_err(bad_request)?;
                let b = b64_decode(&req.image_b_b64).map_err(bad_request)?;
                let winner = match j.compare(&a, &b)? {
                    PresentedChoice::First => "a",
                    PresentedChoice::Second => "b",
                    PresentedChoice::Tie => "tie",
                };
                reply(JudgePairResponse {
                    winner: winner.to_string(),
                })
            }
            TEACHER_PATH => {
                let t = self.teacher.as_ref().ok_or_else(|| self.missing("teacher"))?;
                let req: TeacherRequest = parse(body)?;
                reply(TeacherResponse {
                    text: t.complete(&req.messages)?,
                })
            }
            other => Err(bad_request(format!("unknown path {other}"))),
        }
    }
}
