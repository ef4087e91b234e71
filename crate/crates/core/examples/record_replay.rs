//! Records a session against the simulated backends through the wire
//! protocol, then replays it from the cache file with no live backend.

use std::sync::Arc;

use agentloop::agent::{run_episode, EpisodeConfig};
use agentloop::backends::http::{HttpGenerator, HttpJudge};
use agentloop::backends::loopback::InProcessServer;
use agentloop::backends::replay::{RecordingTransport, ReplayCache, ReplayTransport};
use agentloop::backends::transport::Transport;
use agentloop::backends::ImageStore;
use agentloop::seed::rng_for;
use agentloop::sim::{ConstraintQuery, OracleJudge, ReflectivePolicy, SimConfig, SimGenerator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sim = SimConfig::default();
    let server = InProcessServer::new()
        .with_generator(Arc::new(SimGenerator::new("sim", sim)))
        .with_judge(Arc::new(OracleJudge::default()));
    let recorder = Arc::new(RecordingTransport::new(server));
    let queries: Vec<_> = (0..5u64)
        .map(|i| ConstraintQuery::sample(sim.k, &mut rng_for(2, &[i])).map(|q| q.to_query(format!("q{i}"))))
        .collect::<Result<_, _>>()?;

    let play = |transport: Arc<dyn Transport>| -> Result<Vec<String>, Box<dyn std::error::Error>> {
        let gen = HttpGenerator::new("gen", transport.clone(), serde_json::json!({}));
        let judge = HttpJudge::new("judge", transport);
        let store = ImageStore::new();
        let mut out = Vec::new();
        for (i, q) in queries.iter().enumerate() {
            let t = run_episode(q, &ReflectivePolicy::default(), &gen, &judge, &store, &EpisodeConfig::new(3, i as u64))?;
            out.push(serde_json::to_string(&t)?);
        }
        Ok(out)
    };

    let live = play(recorder.clone())?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("session.jsonl");
    recorder.snapshot().save(&path)?;
    let cache = ReplayCache::load(&path)?;
    println!("recorded {} exchanges to {}", cache.len(), path.display());

    let replayed = play(Arc::new(ReplayTransport::new("replay", cache)))?;
    println!("replay identical: {}", live == replayed);
    Ok(())
}
