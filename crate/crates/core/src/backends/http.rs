//! Wire-protocol clients.
//!
//! ```text
//! POST /v1/generate       {prompt, seed, params}            -> {image_b64, model}
//! POST /v1/judge/point    {prompt, image_b64, hints}        -> {pass, reasoning}
//! POST /v1/judge/pair     {image_a_b64, image_b_b64}        -> {winner: "a" | "b" | "tie"}
//! POST /v1/teacher/complete {messages}                      -> {text}
//! ```
//!
//! The clients are transport-agnostic, so the same code speaks to a live
//! server, a replay cache or the in-process server.

use std::sync::Arc;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::transport::Transport;
use super::{
    BackendError, GeneratedImage, ImageGenerator, Judge, JudgePointResult, Message,
    PresentedChoice, Teacher,
};
use crate::agent::Query;

pub const GENERATE_PATH: &str = "/v1/generate";
pub const JUDGE_POINT_PATH: &str = "/v1/judge/point";
pub const JUDGE_PAIR_PATH: &str = "/v1/judge/pair";
pub const TEACHER_PATH: &str = "/v1/teacher/complete";

pub fn b64_encode(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn b64_decode(text: &str) -> Result<Vec<u8>, String> {
    base64::engine::general_purpose::STANDARD
        .decode(text)
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub seed: u64,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub image_b64: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgePointRequest {
    pub prompt: String,
    pub image_b64: String,
    #[serde(default)]
    pub hints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgePointResponse {
    pub pass: bool,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgePairRequest {
    pub image_a_b64: String,
    pub image_b_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgePairResponse {
    /// `"a"`, `"b"`, or `"tie"` from order-aware judges.
    pub winner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherRequest {
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherResponse {
    pub text: String,
}

fn decode_reply<T: for<'de> Deserialize<'de>>(backend: &str, value: Value) -> Result<T, BackendError> {
    serde_json::from_value(value).map_err(|e| BackendError::MalformedReply {
        backend: backend.to_string(),
        detail: e.to_string(),
    })
}

fn to_body<T: Serialize>(req: &T) -> Value {
    serde_json::to_value(req).expect("request serializes")
}

pub struct HttpGenerator {
    name: String,
    transport: Arc<dyn Transport>,
    params: Value,
}

impl HttpGenerator {
    pub fn new(name: impl Into<String>, transport: Arc<dyn Transport>, params: Value) -> Self {
        Self {
            name: name.into(),
            transport,
            params,
        }
    }
}

impl ImageGenerator for HttpGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, prompt: &str, seed: u64) -> Result<GeneratedImage, BackendError> {
        let body = to_body(&GenerateRequest {
            prompt: prompt.to_string(),
            seed,
            params: self.params.clone(),
        });
        let reply: GenerateResponse = decode_reply(&self.name, self.transport.post(GENERATE_PATH, &body)?)?;
        let bytes = b64_decode(&reply.image_b64).map_err(|detail| BackendError::MalformedReply {
            backend: self.name.clone(),
            detail,
        })?;
        Ok(GeneratedImage {
            bytes,
            model: reply.model,
        })
    }
}

pub struct HttpJudge {
    name: String,
    transport: Arc<dyn Transport>,
}

impl HttpJudge {
    pub fn new(name: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Self {
            name: name.into(),
            transport,
        }
    }
}

impl Judge for HttpJudge {
    fn name(&self) -> &str {
        &self.name
    }

    fn judge_point(
        &self,
        query: &Query,
        image: &[u8],
        hints: &[String],
    ) -> Result<JudgePointResult, BackendError> {
        let body = to_body(&JudgePointRequest {
            prompt: query.text.clone(),
            image_b64: b64_encode(image),
            hints: hints.to_vec(),
        });
        let reply: JudgePointResponse = decode_reply(&self.name, self.transport.post(JUDGE_POINT_PATH, &body)?)?;
        Ok(JudgePointResult {
            pass: reply.pass,
            reasoning: reply.reasoning,
        })
    }

    fn compare(&self, first: &[u8], second: &[u8]) -> Result<PresentedChoice, BackendError> {
        let body = to_body(&JudgePairRequest {
            image_a_b64: b64_encode(first),
            image_b_b64: b64_encode(second),
        });
        let reply: JudgePairResponse = decode_reply(&self.name, self.transport.post(JUDGE_PAIR_PATH, &body)?)?;
        match reply.winner.as_str() {
            "a" => Ok(PresentedChoice::First),
            "b" => Ok(PresentedChoice::Second),
            "tie" => Ok(PresentedChoice::Tie),
            other => Err(BackendError::MalformedReply {
                backend: self.name.clone(),
                detail: format!("unknown winner `{other}`"),
            }),
        }
    }
}

pub struct HttpTeacher {
    name: String,
    transport: Arc<dyn Transport>,
}

impl HttpTeacher {
    pub fn new(name: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Self {
            name: name.into(),
            transport,
        }
    }
}

impl Teacher for HttpTeacher {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, messages: &[Message]) -> Result<String, BackendError> {
        let body = json!({ "messages": messages });
        let reply: TeacherResponse = decode_reply(&self.name, self.transport.post(TEACHER_PATH, &body)?)?;
        Ok(reply.text)
    }
}
