use std::sync::OnceLock;

use regex::Regex;

use super::query::ConstraintQuery;

pub const MAX_EMPHASIS: u8 = 2;

const DETAIL_WORDS: [&str; 8] = [
    "highly", "detailed", "sharp", "focus", "soft", "lighting", "rich", "composition",
];

fn clause_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\(*)([a-z][a-z_]*=[a-z0-9_]+)(\)*)").expect("valid regex"))
}

/// Extracts `attr=value` clauses with their emphasis (matched parenthesis
/// depth, capped at [`MAX_EMPHASIS`]). Later duplicates are ignored.
pub fn parse_clauses(text: &str) -> Vec<(String, u8)> {
    let mut out: Vec<(String, u8)> = Vec::new();
    for cap in clause_regex().captures_iter(text) {
        let clause = cap[2].to_string();
        if out.iter().any(|(c, _)| *c == clause) {
            continue;
        }
        let depth = cap[1].len().min(cap[3].len()).min(usize::from(MAX_EMPHASIS));
        out.push((clause, depth as u8));
    }
    out
}

/// Structured stand-in for a refined prompt: one emphasis level per clause
/// plus a count of extra descriptive words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptProgram {
    pub clauses: Vec<String>,
    pub emphasis: Vec<u8>,
    pub verbosity: usize,
}

impl PromptProgram {
    /// The identity rewrite of a query: no emphasis, no extra words.
    pub fn plain(query: &ConstraintQuery) -> Self {
        Self {
            clauses: query.clauses(),
            emphasis: vec![0; query.k()],
            verbosity: 0,
        }
    }

    pub fn with_emphasis(query: &ConstraintQuery, emphasis: Vec<u8>) -> Self {
        assert_eq!(emphasis.len(), query.k(), "emphasis length must equal K");
        Self {
            clauses: query.clauses(),
            emphasis: emphasis.into_iter().map(|e| e.min(MAX_EMPHASIS)).collect(),
            verbosity: 0,
        }
    }

    /// Reads a program for the given clause list from prompt text. Clauses
    /// absent from the text get emphasis 0.
    pub fn from_text(clauses: &[String], text: &str) -> Self {
        let found = parse_clauses(text);
        let emphasis = clauses
            .iter()
            .map(|c| {
                found
                    .iter()
                    .find(|(f, _)| f == c)
                    .map(|(_, e)| *e)
                    .unwrap_or(0)
            })
            .collect();
        Self {
            clauses: clauses.to_vec(),
            emphasis,
            verbosity: 0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.clauses.len() == self.emphasis.len() && self.emphasis.iter().all(|&e| e <= MAX_EMPHASIS)
    }

    pub fn render(&self) -> String {
        let body: Vec<String> = self
            .clauses
            .iter()
            .zip(&self.emphasis)
            .map(|(c, &e)| {
                let e = usize::from(e);
                format!("{}{}{}", "(".repeat(e), c, ")".repeat(e))
            })
            .collect();
        let mut text = format!("a scene with {}", body.join(", "));
        for i in 0..self.verbosity {
            text.push(' ');
            text.push_str(DETAIL_WORDS[i % DETAIL_WORDS.len()]);
        }
        text
    }
}
