use serde::{Deserialize, Serialize};

use super::GrpoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageSet {
    pub values: Vec<f64>,
}

/// `(r - mean) / std` with the population standard deviation. A group whose
/// rewards are all equal gets all-zero advantages.
pub fn normalize_advantages(rewards: &[f64]) -> Result<AdvantageSet, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::DegenerateGroup { size: rewards.len() });
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(AdvantageSet {
            values: vec![0.0; rewards.len()],
        });
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(AdvantageSet {
        values: rewards.iter().map(|r| (r - mean) / std).collect(),
    })
}
