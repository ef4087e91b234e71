use serde::{Deserialize, Serialize};

use super::GrpoError;

/// Trainer block of the run configuration. Defaults are desk scale; the
/// group sizes, clip range and KL coefficient match the published setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Rollouts sampled per query before resampling.
    #[serde(rename = "G_prime")]
    pub g_prime: usize,
    /// Trajectories kept per query for the update.
    #[serde(rename = "G")]
    pub g: usize,
    pub epsilon_clip: f64,
    pub learning_rate: f64,
    pub kl_coefficient: f64,
    /// Queries per iteration.
    pub batch_size: usize,
    pub iterations: usize,
    /// Round cap per episode.
    pub n_max: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            g_prime: 12,
            g: 8,
            epsilon_clip: 0.2,
            learning_rate: 0.5,
            kl_coefficient: 0.0,
            batch_size: 24,
            iterations: 200,
            n_max: 3,
            seed: 7,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |msg: String| Err(GrpoError::InvalidConfig(msg));
        if self.g < 2 {
            return bad(format!("G must be at least 2, got {}", self.g));
        }
        if self.g_prime < self.g {
            return bad(format!("G' ({}) must be at least G ({})", self.g_prime, self.g));
        }
        if !(self.epsilon_clip > 0.0 && self.epsilon_clip < 1.0) {
            return bad(format!("epsilon_clip must be in (0, 1), got {}", self.epsilon_clip));
        }
        if self.kl_coefficient.is_nan() || self.kl_coefficient < 0.0 {
            return bad(format!("kl_coefficient must be >= 0, got {}", self.kl_coefficient));
        }
        if !self.learning_rate.is_finite() {
            return bad("learning_rate must be finite".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be positive".into());
        }
        Ok(())
    }
}
