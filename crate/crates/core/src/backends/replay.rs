//! Record/replay cache for wire-protocol sessions.
//!
//! Entries are keyed by the SHA-256 of the canonical request: the endpoint
//! path and body serialized as compact JSON with sorted object keys. The
//! cache file is JSONL, one entry per line, sorted by key.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::transport::Transport;
use super::{sha256_hex, BackendError};

/// Canonical cache key for a request.
pub fn request_key(path: &str, body: &Value) -> String {
    // serde_json's default map is ordered, so this serialization is canonical.
    let canonical = json!({ "path": path, "body": body }).to_string();
    sha256_hex(canonical.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub path: String,
    pub request: Value,
    pub response: Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayCache {
    entries: BTreeMap<String, CacheEntry>,
}

impl ReplayCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, path: &str, request: Value, response: Value) {
        let key = request_key(path, &request);
        self.entries.insert(
            key.clone(),
            CacheEntry {
                key,
                path: path.to_string(),
                request,
                response,
            },
        );
    }

    pub fn merge(&mut self, other: ReplayCache) {
        self.entries.extend(other.entries);
    }

    pub fn lookup(&self, path: &str, request: &Value) -> Result<&Value, BackendError> {
        let key = request_key(path, request);
        self.entries
            .get(&key)
            .map(|e| &e.response)
            .ok_or(BackendError::ReplayMiss { key })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in self.entries.values() {
            out.push_str(&serde_json::to_string(entry).expect("cache entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> std::io::Result<Self> {
        let mut cache = Self::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            cache.entries.insert(entry.key.clone(), entry);
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// Writes the cache atomically (temp file then rename).
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        crate::agent::jsonl::write_atomic(path, self.to_jsonl().as_bytes())
    }
}

/// Forwards to an inner transport and records every successful exchange.
pub struct RecordingTransport<T> {
    inner: T,
    cache: Mutex<ReplayCache>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            cache: Mutex::new(ReplayCache::new()),
        }
    }

    pub fn snapshot(&self) -> ReplayCache {
        self.cache.lock().expect("recording cache poisoned").clone()
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let response = self.inner.post(path, body)?;
        self.cache
            .lock()
            .expect("recording cache poisoned")
            .insert(path, body.clone(), response.clone());
        Ok(response)
    }
}

/// Serves responses from a recorded cache only.
pub struct ReplayTransport {
    name: String,
    cache: ReplayCache,
}

impl ReplayTransport {
    pub fn new(name: impl Into<String>, cache: ReplayCache) -> Self {
        Self {
            name: name.into(),
            cache,
        }
    }
}

impl Transport for ReplayTransport {
    fn name(&self) -> &str {
        &self.name
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        self.cache.lookup(path, body).cloned()
    }
}
