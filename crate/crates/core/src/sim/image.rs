use rand::Rng;

use super::config::SimConfig;
use super::program::PromptProgram;
use crate::backends::sha256_hex;
use crate::seed::rng_for;

const MAGIC: &str = "SIMIMG/1";

/// Ground-truth content of a simulated image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimImage {
    pub clauses: Vec<String>,
    pub satisfied: Vec<bool>,
    pub seed: u64,
}

impl SimImage {
    /// Canonical byte encoding; the digest is the SHA-256 of these bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("{MAGIC}\nseed {}\n", self.seed);
        for (c, &s) in self.clauses.iter().zip(&self.satisfied) {
            out.push_str(&format!("{} {c}\n", u8::from(s)));
        }
        out.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let text = std::str::from_utf8(bytes).ok()?;
        let mut lines = text.lines();
        if lines.next()? != MAGIC {
            return None;
        }
        let seed = lines.next()?.strip_prefix("seed ")?.parse().ok()?;
        let mut clauses = Vec::new();
        let mut satisfied = Vec::new();
        for line in lines {
            let (bit, clause) = line.split_once(' ')?;
            satisfied.push(match bit {
                "0" => false,
                "1" => true,
                _ => return None,
            });
            clauses.push(clause.to_string());
        }
        Some(Self {
            clauses,
            satisfied,
            seed,
        })
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn satisfied_count(&self) -> usize {
        self.satisfied.iter().filter(|&&s| s).count()
    }

    pub fn is_satisfied(&self, clause: &str) -> bool {
        self.clauses
            .iter()
            .zip(&self.satisfied)
            .any(|(c, &s)| s && c == clause)
    }
}

/// Renders a program: each clause is satisfied independently with
/// probability `cfg.satisfaction_probability(e_j)`. Pure in (program, seed).
pub fn sim_generate(cfg: &SimConfig, program: &PromptProgram, seed: u64) -> SimImage {
    debug_assert!(program.is_valid());
    let mut rng = rng_for(seed, &[0x7369_6d67_656e]);
    let satisfied = program
        .emphasis
        .iter()
        .map(|&e| rng.gen::<f64>() < cfg.satisfaction_probability(e))
        .collect();
    SimImage {
        clauses: program.clauses.clone(),
        satisfied,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let img = SimImage {
            clauses: vec!["color=red".into(), "size=huge".into()],
            satisfied: vec![true, false],
            seed: 42,
        };
        assert_eq!(SimImage::from_bytes(&img.to_bytes()), Some(img.clone()));
        assert!(SimImage::from_bytes(b"PNG....").is_none());
        assert_eq!(img.satisfied_count(), 1);
        assert!(img.is_satisfied("color=red"));
        assert!(!img.is_satisfied("size=huge"));
    }

    #[test]
    fn generation_is_a_pure_function_of_program_and_seed() {
        let cfg = SimConfig::default();
        let p = PromptProgram {
            clauses: vec!["a=b".into(), "c=d".into(), "e=f".into()],
            emphasis: vec![0, 1, 2],
            verbosity: 0,
        };
        for seed in 0..20 {
            assert_eq!(sim_generate(&cfg, &p, seed), sim_generate(&cfg, &p, seed));
        }
    }
}
