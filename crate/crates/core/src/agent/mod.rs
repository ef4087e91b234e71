//! Agent core: trajectory model, tool-call grammar and the episode loop.

mod episode;
pub mod jsonl;
mod toolcall;
mod trajectory;

pub use episode::{
    image_token_text, run_episode, BackendFailureMode, EpisodeConfig, EpisodeError, Policy,
    PolicyToken, PolicyTurn, TurnContext,
};
pub use toolcall::{
    extract_judgment, parse_tool_call, render_generate, render_turn, sanitize_body, ParseFailure,
    ToolCall, GENERATE_CLOSE, GENERATE_OPEN, JUDGE_CLOSE, JUDGE_OPEN, TERMINATE, THINK_CLOSE,
    THINK_OPEN,
};
pub use trajectory::{
    trajectory_round_count, ImageRef, ModelError, Query, RefinedPrompt, Round, SampleRecord,
    ThoughtKind, ThoughtStep, Token, TokenSource, ToolError, Trajectory, Verdict,
};
