use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::agent::Query;

/// Attribute ids with their admissible target values.
pub const ATTRIBUTE_CATALOG: [(&str, &[&str]); 8] = [
    ("color", &["red", "blue", "green", "yellow", "purple", "orange"]),
    ("count", &["one", "two", "three", "four", "five"]),
    ("shape", &["cube", "sphere", "cone", "cylinder", "torus"]),
    ("position", &["left", "right", "above", "below", "center"]),
    ("material", &["wood", "glass", "metal", "stone", "fabric"]),
    ("texture", &["smooth", "rough", "striped", "dotted"]),
    ("size", &["tiny", "small", "large", "huge"]),
    ("style", &["photo", "sketch", "watercolor", "pixel_art"]),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("K must be in [2, 8], got {0}")]
    BadArity(usize),
    #[error("attribute `{0}` appears twice")]
    DuplicateAttribute(String),
    #[error("attributes and targets differ in length")]
    LengthMismatch,
}

/// Ground-truth task: one required value per attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintQuery {
    attributes: Vec<String>,
    targets: Vec<String>,
}

impl ConstraintQuery {
    pub fn new(attributes: Vec<String>, targets: Vec<String>) -> Result<Self, QueryError> {
        if attributes.len() != targets.len() {
            return Err(QueryError::LengthMismatch);
        }
        if !(2..=8).contains(&attributes.len()) {
            return Err(QueryError::BadArity(attributes.len()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &attributes {
            if !seen.insert(a.as_str()) {
                return Err(QueryError::DuplicateAttribute(a.clone()));
            }
        }
        Ok(Self {
            attributes,
            targets,
        })
    }

    /// Draws K distinct catalog attributes with random targets.
    pub fn sample<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Self, QueryError> {
        if !(2..=ATTRIBUTE_CATALOG.len()).contains(&k) {
            return Err(QueryError::BadArity(k));
        }
        let mut picked = index::sample(rng, ATTRIBUTE_CATALOG.len(), k).into_vec();
        picked.sort_unstable();
        let (attributes, targets) = picked
            .into_iter()
            .map(|i| {
                let (attr, values) = ATTRIBUTE_CATALOG[i];
                let value = values[rng.gen_range(0..values.len())];
                (attr.to_string(), value.to_string())
            })
            .unzip();
        Self::new(attributes, targets)
    }

    pub fn k(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    /// `attr=value` clauses in attribute order.
    pub fn clauses(&self) -> Vec<String> {
        self.attributes
            .iter()
            .zip(&self.targets)
            .map(|(a, t)| format!("{a}={t}"))
            .collect()
    }

    pub fn text(&self) -> String {
        format!("a scene with {}", self.clauses().join(", "))
    }

    pub fn to_query(&self, id: impl Into<String>) -> Query {
        let clauses = self.clauses();
        let hints = self
            .attributes
            .iter()
            .zip(&self.targets)
            .map(|(a, t)| format!("check that the {a} is {t}"))
            .collect();
        Query::new(id, self.text(), Some(clauses))
            .expect("constraint queries are valid by construction")
            .with_hints(hints)
    }
}
