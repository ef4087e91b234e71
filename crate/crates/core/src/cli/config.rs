use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::backends::registry::{GeneratorKind, GeneratorSpec, JudgeKind, JudgeSpec, TeacherKind, TeacherSpec};
use crate::grpo::TrainerConfig;
use crate::sft::{MockTeacherConfig, PipelineConfig};
use crate::sim::SimConfig;

pub const GENERATOR_ENDPOINT_VAR: &str = "AGENTLOOP_GENERATOR_ENDPOINT";
pub const JUDGE_ENDPOINT_VAR: &str = "AGENTLOOP_JUDGE_ENDPOINT";
pub const TEACHER_ENDPOINT_VAR: &str = "AGENTLOOP_TEACHER_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    pub generator: GeneratorSpec,
    pub judge: JudgeSpec,
    pub teacher: TeacherSpec,
}

impl Default for BackendsConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorSpec::new("sim", GeneratorKind::Simulated),
            judge: JudgeSpec::new("oracle", JudgeKind::Oracle),
            teacher: TeacherSpec::new("teacher", TeacherKind::Mock(MockTeacherConfig::default())),
        }
    }
}

/// Which agent plays the episodes of `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Reflective {
        #[serde(default)]
        initial: u8,
        #[serde(default = "one")]
        step: u8,
    },
    /// Linear-softmax policy; zero weights unless a training checkpoint is given.
    Toy {
        #[serde(default)]
        checkpoint: Option<PathBuf>,
    },
}

fn one() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub policy: PolicySpec,
    /// Query JSONL; when unset, `num_queries` queries are drawn from the simulator.
    pub queries: Option<PathBuf>,
    pub num_queries: usize,
    pub n_max: usize,
    pub max_retries: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            policy: PolicySpec::Reflective { initial: 0, step: 1 },
            queries: None,
            num_queries: 40,
            n_max: 3,
            max_retries: 1,
        }
    }
}

/// The whole run configuration. Only `seed` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub environment: SimConfig,
    #[serde(default)]
    pub backends: BackendsConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            out: None,
            environment: SimConfig::default(),
            backends: BackendsConfig::default(),
            agent: AgentConfig::default(),
            trainer: TrainerConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies endpoint overrides from `env`.
    pub fn load(path: &Path, env: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.backends.generator.override_endpoint(env(GENERATOR_ENDPOINT_VAR));
        cfg.backends.judge.override_endpoint(env(JUDGE_ENDPOINT_VAR));
        cfg.backends.teacher.override_endpoint(env(TEACHER_ENDPOINT_VAR));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.environment.validate().map_err(CliError::Config)?;
        self.trainer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.agent.n_max == 0 {
            return Err(CliError::Config("agent.n_max must be at least 1".into()));
        }
        let b = &self.backends;
        if b.generator.name == b.judge.name || b.generator.name == b.teacher.name || b.judge.name == b.teacher.name {
            return Err(CliError::Config("backend names must be distinct".into()));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
