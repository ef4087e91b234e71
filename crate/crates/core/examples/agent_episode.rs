//! Runs a single episode with the hand-coded reflective agent and prints
//! the transcript round by round.
//!
//! cargo run --example agent_episode -- [seed]

use agentloop::agent::{run_episode, EpisodeConfig, TokenSource};
use agentloop::backends::ImageStore;
use agentloop::sim::{ConstraintQuery, OracleJudge, ReflectivePolicy, SimConfig, SimGenerator};
use agentloop::seed::rng_for;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let sim = SimConfig::default();
    let query = ConstraintQuery::sample(sim.k, &mut rng_for(seed, &[]))?.to_query("demo");
    let store = ImageStore::new();
    let traj = run_episode(
        &query,
        &ReflectivePolicy::default(),
        &SimGenerator::new("sim", sim),
        &OracleJudge::default(),
        &store,
        &EpisodeConfig::new(3, seed),
    )?;

    println!("query: {}", query.text);
    for r in &traj.rounds {
        println!("round {}", r.prompt.round);
        println!("  reason:  {}", r.reason.text);
        println!("  prompt:  {}", r.prompt.text);
        println!("  image:   {}", &r.image.handle[..12]);
        println!("  judge:   {}", r.judgment.text);
        println!("  verdict: {:?}", r.verdict);
    }
    let env = traj.token_stream.iter().filter(|t| t.source == TokenSource::Environment).count();
    println!(
        "terminated={} rounds={} tokens={} (environment {env})",
        traj.terminated,
        traj.n,
        traj.token_stream.len()
    );
    Ok(())
}
