//! Trains the toy policy against the simulated environment and prints the
//! reward and round-count trace.
//!
//! cargo run --release --example grpo_training -- [iterations] [seed]

use agentloop::grpo::{train, window_means, TrainerConfig};
use agentloop::sim::{SimConfig, ToyPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = TrainerConfig {
        iterations,
        seed,
        ..TrainerConfig::default()
    };
    let sim = SimConfig::default();
    let start = std::time::Instant::now();
    let out = train(&cfg, &sim, ToyPolicy::zeros(sim.k, cfg.n_max), &mut |m| {
        if m.iteration % 10 == 0 {
            println!(
                "iter {:>4}  reward {:+.3}  rounds {:.2}  pass {:.3}  pair {:.3}",
                m.iteration, m.mean_reward, m.mean_rounds, m.pass_rate, m.pair_reward_rate
            );
        }
    })?;
    if let Some((first, last)) = window_means(&out.metrics, 20, |m| m.mean_reward) {
        println!("first-20 mean reward {first:.4}, last-20 {last:.4}, gain {:+.4}", last - first);
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
