use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{PolicySpec, RunConfig};
use super::CliError;
use crate::agent::jsonl::{read_jsonl, write_atomic, write_jsonl};
use crate::agent::{run_episode, EpisodeConfig, EpisodeError, Policy, Query, Trajectory};
use crate::backends::registry::{BackendRegistry, RegistryError};
use crate::backends::ImageStore;
use crate::grpo::{train, write_metrics_csv, Checkpoint, GrpoError, IterationMetrics, TrainerConfig};
use crate::seed::{derive_seed, label, rng_for};
use crate::sft::validate::{validate_corpus, validate_reports, Violation};
use crate::sft::{
    run_pipeline, sim_pool, Diagnostics, PoolRecord, SftBackends, SftError, SftTrajectory, StageReport,
};
use crate::sim::{ConstraintQuery, ReflectivePolicy, ToyAgent, ToyPolicy};

pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const REPORTS_FILE: &str = "reports.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Backend(b) => CliError::Backend(b.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<GrpoError> for CliError {
    fn from(e: GrpoError) -> Self {
        match e {
            GrpoError::InvalidConfig(m) => CliError::Config(m),
            GrpoError::Episode(e) => e.into(),
            GrpoError::Io(e) => CliError::Io(e),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<EpisodeError> for CliError {
    fn from(e: EpisodeError) -> Self {
        match e {
            EpisodeError::InvalidRoundCap => CliError::Config(e.to_string()),
            EpisodeError::Backend(b) => CliError::Backend(b.to_string()),
        }
    }
}

impl From<SftError> for CliError {
    fn from(e: SftError) -> Self {
        match e {
            SftError::TeacherUnavailable(_) => CliError::Backend(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    Ok(write_atomic(path, text.as_bytes())?)
}

fn input_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub episodes: usize,
    pub terminated: usize,
    pub tool_errors: usize,
    pub mean_rounds: f64,
    /// Entry r-1: share of episodes whose latest image after at most r
    /// rounds passed the judge.
    pub pass_rate_by_round: Vec<f64>,
}

impl RunSummary {
    pub fn of(trajectories: &[Trajectory], n_max: usize) -> Self {
        let n = trajectories.len().max(1) as f64;
        let pass_rate_by_round = (1..=n_max)
            .map(|r| {
                let passed = trajectories
                    .iter()
                    .filter(|t| t.rounds[..r.min(t.rounds.len())].last().is_some_and(|x| x.verdict.satisfied))
                    .count();
                passed as f64 / n
            })
            .collect();
        Self {
            episodes: trajectories.len(),
            terminated: trajectories.iter().filter(|t| t.terminated).count(),
            tool_errors: trajectories.iter().filter(|t| t.has_tool_error()).count(),
            mean_rounds: trajectories.iter().map(|t| t.n).sum::<usize>() as f64 / n,
            pass_rate_by_round,
        }
    }
}

fn load_queries(cfg: &RunConfig) -> Result<Vec<Query>, CliError> {
    let queries = match &cfg.agent.queries {
        Some(path) => read_jsonl::<Query>(path).map_err(|e| input_error(path, e))?,
        None => (0..cfg.agent.num_queries)
            .map(|i| {
                let mut rng = rng_for(cfg.seed, &[label("query"), i as u64]);
                ConstraintQuery::sample(cfg.environment.k, &mut rng)
                    .map(|q| q.to_query(format!("q-{i:05}")))
                    .map_err(|e| CliError::Config(e.to_string()))
            })
            .collect::<Result<_, _>>()?,
    };
    for q in &queries {
        q.validate().map_err(|e| CliError::Config(format!("query {}: {e}", q.id)))?;
    }
    Ok(queries)
}

/// Runs one episode per query and writes the trajectories and a summary.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let queries = load_queries(cfg)?;
    let toy;
    let toy_agent;
    let reflective;
    let policy: &dyn Policy = match &cfg.agent.policy {
        PolicySpec::Reflective { initial, step } => {
            reflective = ReflectivePolicy {
                initial: *initial,
                step: *step,
            };
            &reflective
        }
        PolicySpec::Toy { checkpoint } => {
            toy = match checkpoint {
                Some(path) => Checkpoint::load(path)
                    .and_then(|c| c.policy())
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
                None => ToyPolicy::zeros(cfg.environment.k, cfg.agent.n_max),
            };
            if toy.n_max != cfg.agent.n_max {
                return Err(CliError::Config("checkpoint n_max differs from agent.n_max".into()));
            }
            if let Some(q) = queries.iter().find(|q| q.constraints().len() != toy.k) {
                return Err(CliError::Config(format!(
                    "query {} has {} constraints but the policy expects {}",
                    q.id,
                    q.constraints().len(),
                    toy.k
                )));
            }
            toy_agent = ToyAgent::new(&toy);
            &toy_agent
        }
    };

    let mut registry = BackendRegistry::new();
    let generator = registry.add_generator(&cfg.backends.generator, &cfg.environment)?;
    let judge = registry.add_judge(&cfg.backends.judge)?;
    let store = ImageStore::new();
    let mut trajectories = Vec::with_capacity(queries.len());
    // Sequential so stateful backends see a fixed call order.
    for (i, q) in queries.iter().enumerate() {
        let ep = EpisodeConfig {
            max_retries: cfg.agent.max_retries,
            ..EpisodeConfig::new(cfg.agent.n_max, derive_seed(cfg.seed, &[label("episode"), i as u64]))
        };
        trajectories.push(run_episode(q, policy, generator.as_ref(), judge.as_ref(), &store, &ep)?);
    }
    registry.save_recordings()?;

    let summary = RunSummary::of(&trajectories, cfg.agent.n_max);
    write_jsonl(&out.join(TRAJECTORIES_FILE), &trajectories)?;
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Trains the toy policy in the simulator; the run seed replaces the
/// trainer's own.
pub fn cmd_train(
    cfg: &RunConfig,
    out: &Path,
    sink: &mut dyn FnMut(&IterationMetrics),
) -> Result<Vec<IterationMetrics>, CliError> {
    let trainer = TrainerConfig {
        seed: cfg.seed,
        ..cfg.trainer
    };
    let initial = ToyPolicy::zeros(cfg.environment.k, trainer.n_max);
    let outcome = train(&trainer, &cfg.environment, initial, sink)?;
    Checkpoint::new(&trainer, &cfg.environment, &outcome.policy, outcome.metrics.len())
        .save(&out.join(CHECKPOINT_FILE))?;
    write_metrics_csv(&out.join(METRICS_FILE), &outcome.metrics)?;
    Ok(outcome.metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub stages: Vec<StageReport>,
    pub accepted: usize,
    pub corpus: usize,
    pub quotas: BTreeMap<String, usize>,
    pub redistributed: Vec<String>,
    pub violations: Vec<Violation>,
}

/// Builds the cold-start corpus from a pool file, or from a simulated pool
/// when none is given.
pub fn cmd_build_sft(cfg: &RunConfig, pool: Option<&Path>, out: &Path) -> Result<BuildReport, CliError> {
    let records = match pool {
        Some(path) => read_jsonl::<PoolRecord>(path).map_err(|e| input_error(path, e))?,
        None => sim_pool(
            cfg.pipeline.pool_size,
            cfg.environment.k,
            cfg.pipeline.synthetic_fraction,
            derive_seed(cfg.seed, &[label("pool")]),
        )?,
    };
    let store = ImageStore::new();
    let candidates = records
        .into_iter()
        .map(|r| r.into_candidate(&store).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut registry = BackendRegistry::new();
    let generator = registry.add_generator(&cfg.backends.generator, &cfg.environment)?;
    let judge = registry.add_judge(&cfg.backends.judge)?;
    let teacher = registry.add_teacher(&cfg.backends.teacher)?;
    let backends = SftBackends {
        generator: generator.as_ref(),
        judge: judge.as_ref(),
        teacher: teacher.as_ref(),
        store: &store,
    };
    let output = run_pipeline(&candidates, &backends, &cfg.pipeline, cfg.seed)?;
    registry.save_recordings()?;

    let mut violations = validate_reports(&output.reports);
    violations.extend(validate_corpus(&output.corpus, &cfg.pipeline.screen(), &cfg.pipeline.rubric));
    let report = BuildReport {
        stages: output.reports,
        accepted: output.accepted.len(),
        corpus: output.corpus.len(),
        quotas: output.quotas,
        redistributed: output.redistributed,
        violations,
    };
    write_jsonl(&out.join(CORPUS_FILE), &output.corpus)?;
    write_json(&out.join(REPORTS_FILE), &report)?;
    Ok(report)
}

/// Reads agent trajectories or corpus records, whichever the file holds.
pub fn read_diagnostic_input(path: &Path) -> Result<Diagnostics, CliError> {
    match read_jsonl::<Trajectory>(path) {
        Ok(ts) => Ok(Diagnostics::of_trajectories(&ts)),
        Err(first) => match read_jsonl::<SftTrajectory>(path) {
            Ok(ts) => Ok(Diagnostics::of_corpus(&ts)),
            Err(_) => Err(input_error(path, first)),
        },
    }
}

pub fn cmd_diagnose(input: &Path, out: &Path) -> Result<Diagnostics, CliError> {
    let d = read_diagnostic_input(input)?;
    write_json(&out.join(DIAGNOSTICS_FILE), &d)?;
    Ok(d)
}

/// Re-runs the corpus screens over finished output.
pub fn cmd_validate(cfg: &RunConfig, corpus: &Path, reports: Option<&Path>) -> Result<Vec<Violation>, CliError> {
    let records = read_jsonl::<SftTrajectory>(corpus).map_err(|e| input_error(corpus, e))?;
    let mut violations = validate_corpus(&records, &cfg.pipeline.screen(), &cfg.pipeline.rubric);
    if let Some(path) = reports {
        let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e))?;
        let report: BuildReport = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        violations.extend(validate_reports(&report.stages));
        if report.corpus != records.len() {
            violations.push(Violation {
                id: corpus.display().to_string(),
                rule: "report".into(),
                detail: format!("report lists {} records, file has {}", report.corpus, records.len()),
            });
        }
    }
    Ok(violations)
}
