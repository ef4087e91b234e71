//! Builds a small cold-start corpus from a simulated pool with a noisy
//! mock teacher and prints each stage's accounting.

use agentloop::backends::ImageStore;
use agentloop::sft::validate::validate_corpus;
use agentloop::sft::{run_pipeline, sim_pool, Diagnostics, MockTeacher, MockTeacherConfig, PipelineConfig, SftBackends};
use agentloop::sim::{OracleJudge, SimConfig, SimGenerator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = ImageStore::new();
    let pool = sim_pool(400, 3, 0.5, 1)?
        .into_iter()
        .map(|r| r.into_candidate(&store))
        .collect::<Result<Vec<_>, _>>()?;
    let teacher = MockTeacher::new(
        "teacher",
        MockTeacherConfig {
            format_error_rate: 0.05,
            leak_rate: 0.1,
            judge_flip: 0.05,
            ..Default::default()
        },
    )?;
    let (gen, judge) = (SimGenerator::new("sim", SimConfig::default()), OracleJudge::default());
    let cfg = PipelineConfig::default();
    let b = SftBackends {
        generator: &gen,
        judge: &judge,
        teacher: &teacher,
        store: &store,
    };
    let out = run_pipeline(&pool, &b, &cfg, 1)?;

    for r in &out.reports {
        println!("{:16} {:4} -> {:4}  {:?}", r.stage, r.input, r.retained, r.rejections);
    }
    println!("quotas {:?}", out.quotas);
    println!("violations {}", validate_corpus(&out.corpus, &cfg.screen(), &cfg.rubric).len());
    print!("{}", Diagnostics::of_corpus(&out.corpus).table());
    if let Some(t) = out.corpus.iter().find(|t| t.rounds.len() == 2) {
        println!("\nsample two-round record {}:", t.id);
        for tok in &t.tokens {
            println!("  [{}] {}", tok.loss_mask, tok.text.replace('\n', " "));
        }
    }
    Ok(())
}
