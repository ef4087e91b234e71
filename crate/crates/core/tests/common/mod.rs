#![allow(dead_code)]

use std::collections::BTreeMap;

use agentloop::agent::{
    run_episode, EpisodeConfig, ImageRef, Query, RefinedPrompt, Round, ThoughtKind, ThoughtStep, Token,
    Trajectory, Verdict,
};
use agentloop::backends::ImageStore;
use agentloop::grpo::RolloutGroup;
use agentloop::reward::score_trajectory;
use agentloop::seed::rng_for;
use agentloop::sim::{ConstraintQuery, OracleJudge, SimConfig, SimGenerator, SimImage, ToyAgent, ToyPolicy};
use rand::Rng;

pub fn random_policy<R: Rng>(rng: &mut R, scale: f64) -> ToyPolicy {
    let mut p = ToyPolicy::zeros(3, 3);
    for w in &mut p.weights {
        *w = rng.gen_range(-scale..scale);
    }
    p
}

/// `size` episodes of the toy agent on one simulated query.
pub fn sampled_group(old: &ToyPolicy, size: usize, seed: u64) -> RolloutGroup {
    let sim = SimConfig::default();
    let gen = SimGenerator::new("sim", sim);
    let judge = OracleJudge::default();
    let store = ImageStore::new();
    let query = ConstraintQuery::sample(sim.k, &mut rng_for(seed, &[])).unwrap().to_query("q");
    let agent = ToyAgent::new(old);
    let mut trajectories = Vec::new();
    let mut rewards = Vec::new();
    for i in 0..size as u64 {
        let s = seed.wrapping_mul(1_000).wrapping_add(i);
        let t = run_episode(&query, &agent, &gen, &judge, &store, &EpisodeConfig::new(3, s)).unwrap();
        rewards.push(score_trajectory(&t, &judge, &store, s));
        trajectories.push(t);
    }
    RolloutGroup {
        query,
        trajectories,
        rewards,
    }
}

/// Stores one simulated image per entry of `scores` (satisfied attribute
/// count out of `k`) and wraps them in a trajectory.
pub fn scored_trajectory(store: &ImageStore, scores: &[usize], k: usize) -> Trajectory {
    let clauses: Vec<String> = (0..k).map(|j| format!("attr{j}=v{j}")).collect();
    let query = Query::new("q", "chain", Some(clauses.clone())).unwrap();
    let mut rounds = Vec::new();
    let mut tokens = Vec::new();
    for (i, &s) in scores.iter().enumerate() {
        let round = i as u32 + 1;
        let image = SimImage {
            clauses: clauses.clone(),
            satisfied: (0..k).map(|j| j < s).collect(),
            seed: i as u64,
        };
        let handle = store.put(&image.to_bytes());
        let image = ImageRef {
            handle,
            round,
            meta: BTreeMap::new(),
        };
        tokens.push(Token::policy("turn", None));
        tokens.push(Token::environment(agentloop::agent::image_token_text(&image)));
        let verdict = if s == k { Verdict::pass() } else { Verdict::fail(vec!["unmet".into()]) };
        rounds.push(Round {
            reason: ThoughtStep {
                kind: ThoughtKind::Reason,
                text: "r".into(),
                round,
            },
            prompt: RefinedPrompt {
                text: "p".into(),
                round,
                well_formed: true,
            },
            image,
            judgment: ThoughtStep {
                kind: ThoughtKind::Judge,
                text: "j".into(),
                round,
            },
            verdict,
        });
    }
    Trajectory {
        query,
        n: rounds.len(),
        rounds,
        terminated: true,
        token_stream: tokens,
        parse_failures: 0,
        tool_error: None,
        seed: 0,
    }
}

pub fn sim_queries(n: usize, k: usize, seed: u64) -> Vec<Query> {
    (0..n as u64)
        .map(|i| {
            ConstraintQuery::sample(k, &mut rng_for(seed, &[i]))
                .unwrap()
                .to_query(format!("q{i}"))
        })
        .collect()
}
