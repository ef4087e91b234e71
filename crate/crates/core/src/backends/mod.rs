//! Uniform interfaces for the image generator, the judge and the SFT teacher.
//!
//! Backends exchange raw image bytes; the rest of the crate refers to images
//! only through content-addressed [`ImageRef`] handles resolved by an
//! [`ImageStore`].

pub mod http;
pub mod loopback;
pub mod registry;
pub mod replay;
pub mod transport;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{ImageRef, Query, RefinedPrompt, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend `{backend}` unavailable after {attempts} attempt(s): {message}")]
    Unavailable {
        backend: String,
        attempts: u32,
        message: String,
    },
    #[error("replay cache has no entry for request {key}")]
    ReplayMiss { key: String },
    #[error("malformed reply from `{backend}`: {detail}")]
    MalformedReply { backend: String, detail: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("image {0} is not in the store")]
    MissingImage(String),
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Raw output of a generator call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImage {
    pub bytes: Vec<u8>,
    pub model: String,
}

pub trait ImageGenerator: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, prompt: &str, seed: u64) -> Result<GeneratedImage, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePointResult {
    pub pass: bool,
    pub reasoning: String,
}

/// Choice of a pair judge in the order the pair was presented to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresentedChoice {
    First,
    Second,
    /// Neither image is better. Only order-aware judges (oracles) report this.
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairWinner {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresentedOrder {
    AsGiven,
    Swapped,
}

/// Pairwise outcome mapped back to trajectory order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePairResult {
    pub winner: PairWinner,
    pub presented_order: PresentedOrder,
}

pub trait Judge: Send + Sync {
    fn name(&self) -> &str;

    fn judge_point(
        &self,
        query: &Query,
        image: &[u8],
        hints: &[String],
    ) -> Result<JudgePointResult, BackendError>;

    fn compare(&self, first: &[u8], second: &[u8]) -> Result<PresentedChoice, BackendError>;

    /// Deficiency-level inspection used as the agent's view of its own
    /// output. The default derives it from a hint-free pointwise call.
    fn inspect(&self, query: &Query, image: &[u8]) -> Result<Verdict, BackendError> {
        let r = self.judge_point(query, image, &[])?;
        Ok(if r.pass {
            Verdict::pass()
        } else {
            Verdict::fail(vec![r.reasoning])
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
    /// Base64-encoded images attached to the message.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<String>,
}

impl Message {
    pub fn new(role: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            content: content.into(),
            images: Vec::new(),
        }
    }

    pub fn with_image(mut self, bytes: &[u8]) -> Self {
        use base64::Engine;
        self.images
            .push(base64::engine::general_purpose::STANDARD.encode(bytes));
        self
    }
}

pub trait Teacher: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, messages: &[Message]) -> Result<String, BackendError>;
}

/// Content-addressed image bytes shared by generators and judges.
#[derive(Debug, Default)]
pub struct ImageStore {
    images: RwLock<HashMap<String, Arc<[u8]>>>,
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&self, bytes: &[u8]) -> String {
        let handle = sha256_hex(bytes);
        self.images
            .write()
            .expect("image store poisoned")
            .entry(handle.clone())
            .or_insert_with(|| Arc::from(bytes));
        handle
    }

    pub fn get(&self, handle: &str) -> Result<Arc<[u8]>, BackendError> {
        self.images
            .read()
            .expect("image store poisoned")
            .get(handle)
            .cloned()
            .ok_or_else(|| BackendError::MissingImage(handle.to_string()))
    }

    pub fn len(&self) -> usize {
        self.images.read().expect("image store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generates an image for a well-formed prompt and registers it in the store.
pub fn generate(
    backend: &dyn ImageGenerator,
    store: &ImageStore,
    prompt: &RefinedPrompt,
    seed: u64,
) -> Result<ImageRef, BackendError> {
    if !prompt.well_formed {
        return Err(BackendError::InvalidRequest(
            "prompt is not well formed".into(),
        ));
    }
    let image = backend.generate(&prompt.text, seed)?;
    let handle = store.put(&image.bytes);
    let meta = BTreeMap::from([
        ("backend".to_string(), backend.name().to_string()),
        ("model".to_string(), image.model),
        ("seed".to_string(), seed.to_string()),
    ]);
    Ok(ImageRef {
        handle,
        round: prompt.round,
        meta,
    })
}

pub fn judge_point(
    backend: &dyn Judge,
    store: &ImageStore,
    query: &Query,
    image: &ImageRef,
    criteria_hints: &[String],
) -> Result<JudgePointResult, BackendError> {
    let bytes = store.get(&image.handle)?;
    match backend.judge_point(query, &bytes, criteria_hints) {
        Err(BackendError::MalformedReply { backend, detail }) => {
            log::warn!("malformed pointwise reply from {backend}: {detail}; scoring as fail");
            Ok(JudgePointResult {
                pass: false,
                reasoning: format!("malformed judge reply: {detail}"),
            })
        }
        other => other,
    }
}

/// Compares two consecutive images with a uniformly shuffled presentation
/// order. The later image wins only when the judge prefers it strictly; ties
/// and malformed replies go to the earlier image.
pub fn judge_pair<R: Rng + ?Sized>(
    backend: &dyn Judge,
    store: &ImageStore,
    earlier: &ImageRef,
    later: &ImageRef,
    rng: &mut R,
) -> Result<JudgePairResult, BackendError> {
    let earlier_bytes = store.get(&earlier.handle)?;
    let later_bytes = store.get(&later.handle)?;
    let presented_order = if rng.gen::<bool>() {
        PresentedOrder::Swapped
    } else {
        PresentedOrder::AsGiven
    };
    let choice = match presented_order {
        PresentedOrder::AsGiven => backend.compare(&earlier_bytes, &later_bytes),
        PresentedOrder::Swapped => backend.compare(&later_bytes, &earlier_bytes),
    };
    let choice = match choice {
        Err(BackendError::MalformedReply { backend, detail }) => {
            log::warn!("malformed pairwise reply from {backend}: {detail}; earlier image wins");
            PresentedChoice::Tie
        }
        other => other?,
    };
    let winner = match (presented_order, choice) {
        (_, PresentedChoice::Tie) => PairWinner::First,
        (PresentedOrder::AsGiven, PresentedChoice::First) => PairWinner::First,
        (PresentedOrder::AsGiven, PresentedChoice::Second) => PairWinner::Second,
        (PresentedOrder::Swapped, PresentedChoice::First) => PairWinner::Second,
        (PresentedOrder::Swapped, PresentedChoice::Second) => PairWinner::First,
    };
    Ok(JudgePairResult {
        winner,
        presented_order,
    })
}
