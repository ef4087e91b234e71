use serde::{Deserialize, Serialize};

/// Environment block of the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Attributes per query.
    #[serde(rename = "K")]
    pub k: usize,
    pub p0: f64,
    pub g: f64,
    /// Upper clamp on per-attribute satisfaction probability.
    pub clamp: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            k: 3,
            p0: 0.35,
            g: 0.25,
            clamp: 0.98,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// p(e) = clamp(p0 + g * e, 0, clamp)
    pub fn satisfaction_probability(&self, emphasis: u8) -> f64 {
        (self.p0 + self.g * f64::from(emphasis)).clamp(0.0, self.clamp)
    }

    /// Probability that every attribute is satisfied.
    pub fn pass_probability(&self, emphasis: &[u8]) -> f64 {
        emphasis
            .iter()
            .map(|&e| self.satisfaction_probability(e))
            .product()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(2..=8).contains(&self.k) {
            return Err(format!("K must be in [2, 8], got {}", self.k));
        }
        if !(0.0..=1.0).contains(&self.clamp) {
            return Err(format!("clamp must be in [0, 1], got {}", self.clamp));
        }
        if !self.p0.is_finite() || !self.g.is_finite() {
            return Err("p0 and g must be finite".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_probabilities() {
        let c = SimConfig::default();
        assert!((c.satisfaction_probability(0) - 0.35).abs() < 1e-15);
        assert!((c.satisfaction_probability(1) - 0.60).abs() < 1e-15);
        assert!((c.satisfaction_probability(2) - 0.85).abs() < 1e-15);
        let steep = SimConfig { g: 0.5, ..c };
        assert_eq!(steep.satisfaction_probability(2), 0.98);
        let negative = SimConfig { p0: -0.4, ..c };
        assert_eq!(negative.satisfaction_probability(0), 0.0);
    }

    #[test]
    fn k_range_is_enforced() {
        assert!(SimConfig { k: 1, ..Default::default() }.validate().is_err());
        assert!(SimConfig { k: 9, ..Default::default() }.validate().is_err());
        assert!(SimConfig { k: 8, ..Default::default() }.validate().is_ok());
    }
}
