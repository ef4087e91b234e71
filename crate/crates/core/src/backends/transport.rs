//! JSON-over-HTTP transport with bounded retries.

use std::time::Duration;

use serde_json::Value;

use super::BackendError;

/// A JSON request/response channel. Implemented by the real HTTP client, the
/// record/replay layers and the in-process server.
pub trait Transport: Send + Sync {
    fn name(&self) -> &str;
    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError>;
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        (**self).post(path, body)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): doubles each time.
    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(retry)
    }
}

pub struct HttpTransport {
    name: String,
    endpoint: String,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
}

impl HttpTransport {
    pub fn new(
        name: impl Into<String>,
        endpoint: impl Into<String>,
        timeout: Duration,
        retry: RetryPolicy,
    ) -> Result<Self, BackendError> {
        let name = name.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::InvalidRequest(format!("http client for {name}: {e}")))?;
        Ok(Self {
            name,
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            client,
            retry,
        })
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<Value, AttemptError> {
        let resp = self
            .client
            .post(url)
            .json(body)
            .send()
            .map_err(|e| AttemptError::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(AttemptError::Retryable(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(format!("status {status}")));
        }
        resp.json::<Value>()
            .map_err(|e| AttemptError::Malformed(e.to_string()))
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
    Malformed(String),
}

impl Transport for HttpTransport {
    fn name(&self) -> &str {
        &self.name
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}{}", self.endpoint, path);
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for i in 0..attempts {
            if i > 0 {
                std::thread::sleep(self.retry.backoff(i - 1));
            }
            match self.attempt(&url, body) {
                Ok(v) => return Ok(v),
                Err(AttemptError::Retryable(msg)) => {
                    log::debug!("{} attempt {} failed: {msg}", self.name, i + 1);
                    last = msg;
                }
                Err(AttemptError::Fatal(msg)) => {
                    return Err(BackendError::Unavailable {
                        backend: self.name.clone(),
                        attempts: i + 1,
                        message: msg,
                    })
                }
                Err(AttemptError::Malformed(detail)) => {
                    return Err(BackendError::MalformedReply {
                        backend: self.name.clone(),
                        detail,
                    })
                }
            }
        }
        Err(BackendError::Unavailable {
            backend: self.name.clone(),
            attempts,
            message: last,
        })
    }
}
