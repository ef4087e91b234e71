//! Pass rate by interaction round for the reflective agent, for a few
//! emphasis schedules.
//!
//! cargo run --release --example round_scaling -- [episodes]

use agentloop::agent::{run_episode, EpisodeConfig};
use agentloop::backends::ImageStore;
use agentloop::cli::RunSummary;
use agentloop::seed::rng_for;
use agentloop::sim::{ConstraintQuery, OracleJudge, ReflectivePolicy, SimConfig, SimGenerator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let sim = SimConfig::default();
    let (gen, judge) = (SimGenerator::new("sim", sim), OracleJudge::default());
    for policy in [
        ReflectivePolicy { initial: 0, step: 1 },
        ReflectivePolicy { initial: 0, step: 2 },
        ReflectivePolicy { initial: 1, step: 1 },
    ] {
        let store = ImageStore::new();
        let mut ts = Vec::new();
        for i in 0..episodes {
            let q = ConstraintQuery::sample(sim.k, &mut rng_for(5, &[i]))?.to_query(format!("q{i}"));
            ts.push(run_episode(&q, &policy, &gen, &judge, &store, &EpisodeConfig::new(3, i))?);
        }
        let s = RunSummary::of(&ts, 3);
        let rates: Vec<String> = s.pass_rate_by_round.iter().map(|p| format!("{p:.3}")).collect();
        println!(
            "initial {} step {}: pass by round [{}], mean rounds {:.2}",
            policy.initial,
            policy.step,
            rates.join(", "),
            s.mean_rounds
        );
    }
    Ok(())
}
