//! Computes the diagnostic table over a corpus with a planted share of
//! malformed tool calls.

use agentloop::sft::{diagnostics, DiagnosticRecord};

fn main() {
    let records = (0..2500).map(|i| DiagnosticRecord {
        tool_error: i < 334,
        query_words: 12,
        final_prompt_words: (i >= 334).then_some(12 + i % 9),
        first_pass: Some(i % 4 == 0),
        final_pass: Some(i % 2 == 0),
    });
    print!("{}", diagnostics(records).table());
}
