//! Backend selection from configuration.
//!
//! Any backend may set `record` to a cache path. Its traffic then goes
//! through the wire protocol (in process for local kinds) and every
//! exchange is saved, so the session can later be served by a `replay`
//! backend.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::http::{HttpGenerator, HttpJudge, HttpTeacher};
use super::loopback::InProcessServer;
use super::replay::{RecordingTransport, ReplayCache, ReplayTransport};
use super::transport::{HttpTransport, RetryPolicy, Transport};
use super::{BackendError, ImageGenerator, Judge, Teacher};
use crate::sft::{MockTeacher, MockTeacherConfig};
use crate::sim::{NoisyOracleJudge, OracleJudge, SimConfig, SimGenerator};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("backend name {0:?} is already registered")]
    DuplicateName(String),
    #[error("backend {0:?} of kind http needs an endpoint")]
    MissingEndpoint(String),
    #[error("backend {name:?}: {message}")]
    InvalidParam { name: String, message: String },
    #[error("backend {name:?}: cannot read replay cache {path}: {source}")]
    Cache {
        name: String,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn default_timeout_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorKind {
    Http {
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        params: Value,
    },
    Simulated,
    Replay { cache: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JudgeKind {
    Http {
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
    Oracle,
    NoisyOracle {
        flip_probability: f64,
        #[serde(default)]
        seed: u64,
    },
    Replay { cache: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TeacherKind {
    Http {
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
    Mock(MockTeacherConfig),
    Replay { cache: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec<K> {
    pub name: String,
    #[serde(flatten)]
    pub kind: K,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<PathBuf>,
}

pub type GeneratorSpec = BackendSpec<GeneratorKind>;
pub type JudgeSpec = BackendSpec<JudgeKind>;
pub type TeacherSpec = BackendSpec<TeacherKind>;

impl<K> BackendSpec<K> {
    pub fn new(name: impl Into<String>, kind: K) -> Self {
        Self {
            name: name.into(),
            kind,
            record: None,
        }
    }
}

/// Kinds that talk to a remote endpoint.
pub trait EndpointKind {
    fn endpoint_mut(&mut self) -> Option<&mut Option<String>>;
}

impl EndpointKind for GeneratorKind {
    fn endpoint_mut(&mut self) -> Option<&mut Option<String>> {
        match self {
            GeneratorKind::Http { endpoint, .. } => Some(endpoint),
            _ => None,
        }
    }
}

impl EndpointKind for JudgeKind {
    fn endpoint_mut(&mut self) -> Option<&mut Option<String>> {
        match self {
            JudgeKind::Http { endpoint, .. } => Some(endpoint),
            _ => None,
        }
    }
}

impl EndpointKind for TeacherKind {
    fn endpoint_mut(&mut self) -> Option<&mut Option<String>> {
        match self {
            TeacherKind::Http { endpoint, .. } => Some(endpoint),
            _ => None,
        }
    }
}

impl<K: EndpointKind> BackendSpec<K> {
    /// Replaces the endpoint of an http backend; other kinds are untouched.
    pub fn override_endpoint(&mut self, endpoint: Option<String>) {
        if let (Some(slot), Some(e)) = (self.kind.endpoint_mut(), endpoint) {
            *slot = Some(e);
        }
    }
}

fn http_transport(name: &str, endpoint: &Option<String>, timeout_ms: u64) -> Result<Arc<dyn Transport>, RegistryError> {
    let endpoint = endpoint
        .as_deref()
        .filter(|e| !e.is_empty())
        .ok_or_else(|| RegistryError::MissingEndpoint(name.to_string()))?;
    Ok(Arc::new(HttpTransport::new(
        name,
        endpoint,
        Duration::from_millis(timeout_ms),
        RetryPolicy::default(),
    )?))
}

fn replay_transport(name: &str, cache: &Path) -> Result<Arc<dyn Transport>, RegistryError> {
    let c = ReplayCache::load(cache).map_err(|source| RegistryError::Cache {
        name: name.to_string(),
        path: cache.to_path_buf(),
        source,
    })?;
    Ok(Arc::new(ReplayTransport::new(name, c)))
}

type Recorder = Arc<RecordingTransport<Arc<dyn Transport>>>;

/// Named backends for one run.
#[derive(Default)]
pub struct BackendRegistry {
    generators: BTreeMap<String, Arc<dyn ImageGenerator>>,
    judges: BTreeMap<String, Arc<dyn Judge>>,
    teachers: BTreeMap<String, Arc<dyn Teacher>>,
    recorders: Vec<(PathBuf, Recorder)>,
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_name(&self, name: &str) -> Result<(), RegistryError> {
        if self.generators.contains_key(name) || self.judges.contains_key(name) || self.teachers.contains_key(name) {
            return Err(RegistryError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    fn recorded(&mut self, path: &Path, inner: Arc<dyn Transport>) -> Arc<dyn Transport> {
        let rec: Recorder = Arc::new(RecordingTransport::new(inner));
        self.recorders.push((path.to_path_buf(), rec.clone()));
        rec
    }

    pub fn add_generator(&mut self, spec: &GeneratorSpec, sim: &SimConfig) -> Result<Arc<dyn ImageGenerator>, RegistryError> {
        self.check_name(&spec.name)?;
        let name = spec.name.as_str();
        let (transport, params): (Arc<dyn Transport>, Value) = match &spec.kind {
            GeneratorKind::Simulated => {
                let local: Arc<dyn ImageGenerator> = Arc::new(SimGenerator::new(name, *sim));
                match &spec.record {
                    None => return Ok(self.insert_generator(name, local)),
                    Some(_) => (Arc::new(InProcessServer::new().with_generator(local)), Value::Object(Default::default())),
                }
            }
            GeneratorKind::Http {
                endpoint,
                timeout_ms,
                params,
            } => (http_transport(name, endpoint, *timeout_ms)?, params.clone()),
            GeneratorKind::Replay { cache } => (replay_transport(name, cache)?, Value::Object(Default::default())),
        };
        let transport = match &spec.record {
            Some(path) => self.recorded(path, transport),
            None => transport,
        };
        Ok(self.insert_generator(name, Arc::new(HttpGenerator::new(name, transport, params))))
    }

    fn insert_generator(&mut self, name: &str, g: Arc<dyn ImageGenerator>) -> Arc<dyn ImageGenerator> {
        self.generators.insert(name.to_string(), g.clone());
        g
    }

    pub fn add_judge(&mut self, spec: &JudgeSpec) -> Result<Arc<dyn Judge>, RegistryError> {
        self.check_name(&spec.name)?;
        let name = spec.name.as_str();
        let local: Option<Arc<dyn Judge>> = match &spec.kind {
            JudgeKind::Oracle => Some(Arc::new(OracleJudge::new(name))),
            JudgeKind::NoisyOracle { flip_probability, seed } => Some(Arc::new(
                NoisyOracleJudge::new(name, *flip_probability, *seed).map_err(|message| RegistryError::InvalidParam {
                    name: name.to_string(),
                    message,
                })?,
            )),
            _ => None,
        };
        let transport: Arc<dyn Transport> = match (&spec.kind, local) {
            (_, Some(j)) => match &spec.record {
                None => {
                    self.judges.insert(name.to_string(), j.clone());
                    return Ok(j);
                }
                Some(_) => Arc::new(InProcessServer::new().with_judge(j)),
            },
            (JudgeKind::Http { endpoint, timeout_ms }, None) => http_transport(name, endpoint, *timeout_ms)?,
            (JudgeKind::Replay { cache }, None) => replay_transport(name, cache)?,
            _ => unreachable!("local kinds handled above"),
        };
        let transport = match &spec.record {
            Some(path) => self.recorded(path, transport),
            None => transport,
        };
        let j: Arc<dyn Judge> = Arc::new(HttpJudge::new(name, transport));
        self.judges.insert(name.to_string(), j.clone());
        Ok(j)
    }

    pub fn add_teacher(&mut self, spec: &TeacherSpec) -> Result<Arc<dyn Teacher>, RegistryError> {
        self.check_name(&spec.name)?;
        let name = spec.name.as_str();
        let transport: Arc<dyn Transport> = match &spec.kind {
            TeacherKind::Mock(cfg) => {
                let t: Arc<dyn Teacher> = Arc::new(MockTeacher::new(name, *cfg).map_err(|message| {
                    RegistryError::InvalidParam {
                        name: name.to_string(),
                        message,
                    }
                })?);
                match &spec.record {
                    None => {
                        self.teachers.insert(name.to_string(), t.clone());
                        return Ok(t);
                    }
                    Some(_) => Arc::new(InProcessServer::new().with_teacher(t)),
                }
            }
            TeacherKind::Http { endpoint, timeout_ms } => http_transport(name, endpoint, *timeout_ms)?,
            TeacherKind::Replay { cache } => replay_transport(name, cache)?,
        };
        let transport = match &spec.record {
            Some(path) => self.recorded(path, transport),
            None => transport,
        };
        let t: Arc<dyn Teacher> = Arc::new(HttpTeacher::new(name, transport));
        self.teachers.insert(name.to_string(), t.clone());
        Ok(t)
    }

    pub fn generator(&self, name: &str) -> Option<Arc<dyn ImageGenerator>> {
        self.generators.get(name).cloned()
    }

    pub fn judge(&self, name: &str) -> Option<Arc<dyn Judge>> {
        self.judges.get(name).cloned()
    }

    pub fn teacher(&self, name: &str) -> Option<Arc<dyn Teacher>> {
        self.teachers.get(name).cloned()
    }

    /// Writes every recorded session to its cache file. Backends sharing a
    /// path are merged into one cache.
    pub fn save_recordings(&self) -> std::io::Result<()> {
        let mut merged: BTreeMap<&Path, ReplayCache> = BTreeMap::new();
        for (path, rec) in &self.recorders {
            merged.entry(path.as_path()).or_default().merge(rec.snapshot());
        }
        for (path, cache) in merged {
            cache.save(path)?;
        }
        Ok(())
    }
}
