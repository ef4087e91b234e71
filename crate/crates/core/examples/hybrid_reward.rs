//! Prints the reward table for every legal component combination, then
//! scores a few simulated trajectories with the oracle judge.

use agentloop::agent::{run_episode, EpisodeConfig};
use agentloop::backends::ImageStore;
use agentloop::reward::{combine, score_trajectory};
use agentloop::seed::rng_for;
use agentloop::sim::{ConstraintQuery, OracleJudge, ReflectivePolicy, SimConfig, SimGenerator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("r_point r_format r_pair  lambda  total");
    for point in [0.7, 0.0] {
        for format in [0.0, -0.2] {
            for pair in [0.3, 0.0] {
                let r = combine(point, format, pair)?;
                println!("{point:>7} {format:>8} {pair:>6} {:>7} {:>6}", r.lambda, r.r_total);
            }
        }
    }

    let sim = SimConfig::default();
    let (gen, judge, store) = (SimGenerator::new("sim", sim), OracleJudge::default(), ImageStore::new());
    let policy = ReflectivePolicy { initial: 1, step: 1 };
    println!("\nsimulated episodes:");
    for i in 0..10u64 {
        let q = ConstraintQuery::sample(sim.k, &mut rng_for(11, &[i]))?.to_query(format!("q{i}"));
        let t = run_episode(&q, &policy, &gen, &judge, &store, &EpisodeConfig::new(3, i))?;
        let r = score_trajectory(&t, &judge, &store, i);
        println!(
            "  {}  rounds {}  point {:.1}  pair {:.1}  total {:.2}",
            q.id, t.n, r.r_point, r.r_pair, r.r_total
        );
    }
    Ok(())
}
