//! Multi-turn agentic image generation: an episode loop that treats the
//! image generator as a tool, a hybrid pointwise/pairwise reward, group
//! relative policy optimization over multi-round trajectories, and a
//! cold-start trajectory synthesis pipeline. Everything runs against
//! pluggable backends, including a fully simulated environment.

pub mod agent;
pub mod backends;
pub mod cli;
pub mod grpo;
pub mod reward;
pub mod seed;
pub mod sft;
pub mod sim;
