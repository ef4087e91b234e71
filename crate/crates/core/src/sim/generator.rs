use super::config::SimConfig;
use super::image::sim_generate;
use super::program::{parse_clauses, PromptProgram};
use crate::backends::{BackendError, GeneratedImage, ImageGenerator};

/// Generator backend over the simulator. Only clauses present in the prompt
/// can be satisfied.
#[derive(Debug, Clone)]
pub struct SimGenerator {
    name: String,
    cfg: SimConfig,
}

impl SimGenerator {
    pub fn new(name: impl Into<String>, cfg: SimConfig) -> Self {
        Self {
            name: name.into(),
            cfg,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }
}

impl ImageGenerator for SimGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, prompt: &str, seed: u64) -> Result<GeneratedImage, BackendError> {
        let (clauses, emphasis) = parse_clauses(prompt).into_iter().unzip();
        let program = PromptProgram {
            clauses,
            emphasis,
            verbosity: 0,
        };
        Ok(GeneratedImage {
            bytes: sim_generate(&self.cfg, &program, seed).to_bytes(),
            model: format!("sim-p0={}-g={}", self.cfg.p0, self.cfg.g),
        })
    }
}
