//! Tool-call grammar for policy output.
//!
//! ```text
//! turn   := ws judge? ws think? ws action ws
//! judge  := "<judge>" body "</judge>"
//! think  := "<think>" body "</think>"
//! action := "<generate>" prompt "</generate>" | "<terminate/>"
//! ```
//!
//! Bodies may not contain `<` or `>`. A prompt must contain at least one
//! non-whitespace character.

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub const JUDGE_OPEN: &str = "<judge>";
pub const JUDGE_CLOSE: &str = "</judge>";
pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const GENERATE_OPEN: &str = "<generate>";
pub const GENERATE_CLOSE: &str = "</generate>";
pub const TERMINATE: &str = "<terminate/>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    /// Byte range of the offending text in the raw output.
    pub span: (usize, usize),
    pub reason: String,
}

impl ParseFailure {
    fn new(span: Range<usize>, reason: impl Into<String>) -> Self {
        Self {
            span: (span.start, span.end),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ToolCall {
    Generate {
        judgment: Option<String>,
        reasoning: Option<String>,
        prompt: String,
    },
    Terminate {
        judgment: Option<String>,
        reasoning: Option<String>,
    },
    Failure(ParseFailure),
}

impl ToolCall {
    pub fn judgment(&self) -> Option<&str> {
        match self {
            ToolCall::Generate { judgment, .. } | ToolCall::Terminate { judgment, .. } => {
                judgment.as_deref()
            }
            ToolCall::Failure(_) => None,
        }
    }
}

struct Cursor<'a> {
    raw: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.raw[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at(&self, tag: &str) -> bool {
        self.raw[self.pos..].starts_with(tag)
    }

    /// Reads `open body close`, leaving the cursor after `close`.
    fn block(&mut self, open: &str, close: &str) -> Result<String, ParseFailure> {
        let start = self.pos;
        let body_start = start + open.len();
        let rest = &self.raw[body_start..];
        let Some(close_at) = rest.find(close) else {
            return Err(ParseFailure::new(
                start..self.raw.len(),
                format!("unclosed {open}"),
            ));
        };
        let body = &rest[..close_at];
        if let Some(bad) = body.find(['<', '>']) {
            return Err(ParseFailure::new(
                body_start + bad..body_start + close_at,
                format!("markup inside {open}"),
            ));
        }
        self.pos = body_start + close_at + close.len();
        Ok(body.to_string())
    }
}

/// Parses one policy turn. Pure and deterministic; failures are values.
pub fn parse_tool_call(raw: &str) -> ToolCall {
    match parse_inner(raw) {
        Ok(call) => call,
        Err(failure) => ToolCall::Failure(failure),
    }
}

fn parse_inner(raw: &str) -> Result<ToolCall, ParseFailure> {
    let mut cur = Cursor { raw, pos: 0 };
    cur.skip_ws();
    let judgment = if cur.at(JUDGE_OPEN) {
        Some(cur.block(JUDGE_OPEN, JUDGE_CLOSE)?)
    } else {
        None
    };
    cur.skip_ws();
    let reasoning = if cur.at(THINK_OPEN) {
        Some(cur.block(THINK_OPEN, THINK_CLOSE)?)
    } else {
        None
    };
    cur.skip_ws();
    let call = if cur.at(GENERATE_OPEN) {
        let start = cur.pos;
        let prompt = cur.block(GENERATE_OPEN, GENERATE_CLOSE)?;
        if prompt.trim().is_empty() {
            return Err(ParseFailure::new(start..cur.pos, "empty prompt"));
        }
        ToolCall::Generate {
            judgment,
            reasoning,
            prompt,
        }
    } else if cur.at(TERMINATE) {
        cur.pos += TERMINATE.len();
        ToolCall::Terminate {
            judgment,
            reasoning,
        }
    } else {
        let end = raw.len();
        return Err(ParseFailure::new(
            cur.pos..end,
            "expected <generate> or <terminate/>",
        ));
    };
    cur.skip_ws();
    if cur.pos != raw.len() {
        return Err(ParseFailure::new(cur.pos..raw.len(), "trailing content after action"));
    }
    Ok(call)
}

/// Renders a prompt in tool-call syntax.
pub fn render_generate(prompt: &str) -> String {
    format!("{GENERATE_OPEN}{prompt}{GENERATE_CLOSE}")
}

/// Renders a complete turn.
pub fn render_turn(judgment: Option<&str>, reasoning: Option<&str>, prompt: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(j) = judgment {
        out.push_str(JUDGE_OPEN);
        out.push_str(j);
        out.push_str(JUDGE_CLOSE);
    }
    if let Some(r) = reasoning {
        out.push_str(THINK_OPEN);
        out.push_str(r);
        out.push_str(THINK_CLOSE);
    }
    match prompt {
        Some(p) => out.push_str(&render_generate(p)),
        None => out.push_str(TERMINATE),
    }
    out
}

/// Best-effort extraction of a judge block from output that failed to parse.
pub fn extract_judgment(raw: &str) -> Option<String> {
    let start = raw.find(JUDGE_OPEN)? + JUDGE_OPEN.len();
    let end = raw[start..].find(JUDGE_CLOSE)?;
    Some(raw[start..start + end].to_string())
}

/// Removes characters that would break the grammar from free text.
pub fn sanitize_body(text: &str) -> String {
    text.replace(['<', '>'], "")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn well_formed_call() {
        let raw = "<think>place objects</think><generate>a red cube left of a blue sphere</generate>";
        assert_eq!(
            parse_tool_call(raw),
            ToolCall::Generate {
                judgment: None,
                reasoning: Some("place objects".into()),
                prompt: "a red cube left of a blue sphere".into(),
            }
        );
    }

    #[test]
    fn termination_only() {
        assert_eq!(
            parse_tool_call("<terminate/>"),
            ToolCall::Terminate {
                judgment: None,
                reasoning: None
            }
        );
        assert!(matches!(
            parse_tool_call("<judge>looks right</judge>\n<terminate/>"),
            ToolCall::Terminate { judgment: Some(_), .. }
        ));
    }

    #[test]
    fn double_termination_is_rejected() {
        assert!(matches!(
            parse_tool_call("<terminate/><terminate/>"),
            ToolCall::Failure(_)
        ));
    }

    #[test]
    fn unclosed_call_reports_span() {
        let raw = "<think>x</think><generate>a red cube";
        match parse_tool_call(raw) {
            ToolCall::Failure(f) => {
                assert_eq!(f.span, (16, raw.len()));
                assert_eq!(&raw[f.span.0..f.span.1], "<generate>a red cube");
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn missing_action_and_markup_are_failures() {
        assert!(matches!(parse_tool_call("just prose"), ToolCall::Failure(_)));
        assert!(matches!(
            parse_tool_call("<generate>a <b>bold</b> cat</generate>"),
            ToolCall::Failure(_)
        ));
        assert!(matches!(
            parse_tool_call("<generate>   </generate>"),
            ToolCall::Failure(_)
        ));
        assert!(matches!(
            parse_tool_call("<generate>cat</generate> and more"),
            ToolCall::Failure(_)
        ));
    }

    #[test]
    fn generate_and_terminate_together_is_rejected() {
        assert!(matches!(
            parse_tool_call("<generate>cat</generate><terminate/>"),
            ToolCall::Failure(_)
        ));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(prompt in "[^<>]*[a-zA-Z0-9][^<>]*") {
            let raw = render_generate(&prompt);
            prop_assert_eq!(
                parse_tool_call(&raw),
                ToolCall::Generate { judgment: None, reasoning: None, prompt: prompt.clone() }
            );
        }

        #[test]
        fn parse_is_deterministic(raw in ".{0,64}") {
            prop_assert_eq!(parse_tool_call(&raw), parse_tool_call(&raw));
        }

        #[test]
        fn parser_never_panics_on_tag_soup(raw in "(<generate>|</generate>|<think>|</think>|<terminate/>|<judge>|</judge>|[a-z ]){0,12}") {
            let _ = parse_tool_call(&raw);
        }
    }
}
