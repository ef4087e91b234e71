use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sample::{balanced_sample, default_strata, largest_feasible_size, StratumTarget};
use super::stages::{
    check_consistency, filter_pool, synthesize_judgment, synthesize_reflection, synthesize_round_one,
    Branch, HintLeakScreen, ReflectionContext,
};
use super::teacher::DEFAULT_RUBRIC;
use super::types::{PoolCandidate, PoolRecord, Rejection, SftTrajectory, Source, StageReport};
use super::SftError;
use crate::backends::http::b64_encode;
use crate::backends::{ImageGenerator, ImageStore, Judge, Teacher};
use crate::seed::{derive_seed, label, rng_for};
use crate::sim::{ConstraintQuery, SimImage};

/// Pipeline block of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Run the three-generation solvability screen; when off every
    /// candidate passes through.
    pub screen_pool: bool,
    /// Drop trajectories whose judgments contradict their routing.
    pub consistency_screen: bool,
    pub keep_non_terminal: bool,
    pub rubric: String,
    pub leak_phrases: Vec<String>,
    pub strata: Vec<StratumTarget>,
    /// Corpus size; when unset, the largest size the strata can fill.
    pub corpus_size: Option<usize>,
    /// Simulated pool used when no pool file is given.
    pub pool_size: usize,
    pub synthetic_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            screen_pool: true,
            consistency_screen: true,
            keep_non_terminal: true,
            rubric: DEFAULT_RUBRIC.to_string(),
            leak_phrases: HintLeakScreen::default().phrases,
            strata: default_strata(),
            corpus_size: None,
            pool_size: 500,
            synthetic_fraction: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn screen(&self) -> HintLeakScreen {
        HintLeakScreen {
            phrases: self.leak_phrases.clone(),
        }
    }
}

/// Simulated pool: random K-attribute queries, each with a reference image
/// that satisfies every attribute.
pub fn sim_pool(size: usize, k: usize, synthetic_fraction: f64, seed: u64) -> Result<Vec<PoolRecord>, SftError> {
    let mut out = Vec::with_capacity(size);
    for i in 0..size {
        let mut rng = rng_for(seed, &[label("pool"), i as u64]);
        let q = ConstraintQuery::sample(k, &mut rng).map_err(|e| SftError::InvalidConfig(e.to_string()))?;
        let source = if rng.gen::<f64>() < synthetic_fraction {
            Source::Synthetic
        } else {
            Source::Open
        };
        let id = format!("cand-{i:05}");
        let reference = SimImage {
            clauses: q.clauses(),
            satisfied: vec![true; k],
            seed: derive_seed(seed, &[label("reference"), i as u64]),
        };
        let query = q.to_query(id.clone());
        out.push(PoolRecord {
            id,
            prompt: query.text,
            source,
            constraints: query.constraints,
            hints: query.hints,
            reference_b64: Some(b64_encode(&reference.to_bytes())),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy)]
pub struct SftBackends<'a> {
    pub generator: &'a dyn ImageGenerator,
    pub judge: &'a dyn Judge,
    pub teacher: &'a dyn Teacher,
    pub store: &'a ImageStore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Sampled corpus with token streams.
    pub corpus: Vec<SftTrajectory>,
    /// Everything that passed the screens, before sampling.
    pub accepted: Vec<SftTrajectory>,
    pub reports: Vec<StageReport>,
    pub quotas: BTreeMap<String, usize>,
    pub redistributed: Vec<String>,
}

/// Runs the stage chain over `pool`:
/// pool_filter, round_one, judging, reflection, consistency,
/// balanced_sample. Each report's input is the previous report's output.
pub fn run_pipeline(
    pool: &[PoolCandidate],
    b: &SftBackends<'_>,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PipelineOutput, SftError> {
    let mut reports = Vec::with_capacity(6);

    let retained = if cfg.screen_pool {
        let (kept, report) = filter_pool(pool, b.generator, b.judge, b.store, seed);
        reports.push(report);
        kept
    } else {
        let mut report = StageReport::new("pool_filter");
        pool.iter().for_each(|_| report.keep());
        reports.push(report);
        pool.to_vec()
    };

    let mut report = StageReport::new("round_one");
    let mut partials = Vec::new();
    for c in &retained {
        match synthesize_round_one(c, b.teacher, b.generator, b.store, seed)? {
            Ok(t) => {
                report.keep();
                partials.push((c, t));
            }
            Err(r) => report.reject(&r),
        }
    }
    reports.push(report);

    let mut report = StageReport::new("judging");
    let mut branches = Vec::new();
    for (c, t) in partials {
        match synthesize_judgment(t, b.teacher, b.judge, b.store, &cfg.rubric)? {
            Ok(branch) => {
                report.keep();
                branches.push((c, branch));
            }
            Err(r) => report.reject(&r),
        }
    }
    reports.push(report);

    let screen = cfg.screen();
    let ctx = ReflectionContext {
        teacher: b.teacher,
        generator: b.generator,
        judge: b.judge,
        store: b.store,
        screen: &screen,
        rubric: &cfg.rubric,
        keep_non_terminal: cfg.keep_non_terminal,
        seed,
    };
    let mut report = StageReport::new("reflection");
    let mut reflected = Vec::new();
    for (c, branch) in branches {
        let outcome = match branch {
            Branch::Terminal(t) => Ok(t),
            Branch::Continue(t) => match &c.reference_image {
                None => Err(Rejection::MissingReference),
                Some(hint) => synthesize_reflection(t, hint, &ctx)?,
            },
        };
        match outcome {
            Ok(t) => {
                report.keep();
                reflected.push(t);
            }
            Err(r) => report.reject(&r),
        }
    }
    reports.push(report);

    let mut report = StageReport::new("consistency");
    let mut accepted = Vec::new();
    for t in reflected {
        match if cfg.consistency_screen { check_consistency(&t) } else { Ok(()) } {
            Ok(()) => {
                report.keep();
                accepted.push(t.finalize());
            }
            Err(r) => report.reject(&r),
        }
    }
    reports.push(report);

    let size = match cfg.corpus_size {
        Some(s) => s,
        None => largest_feasible_size(&accepted, &cfg.strata)?,
    };
    let sampled = balanced_sample(&accepted, &cfg.strata, size, derive_seed(seed, &[label("sample")]))?;
    reports.push(sampled.report);

    Ok(PipelineOutput {
        corpus: sampled.corpus,
        accepted,
        reports,
        quotas: sampled.quotas,
        redistributed: sampled.redistributed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::teacher::{MockTeacher, MockTeacherConfig};
    use crate::sft::types::reports_telescope;
    use crate::sft::validate::{validate_corpus, validate_reports};
    use crate::sim::{OracleJudge, SimConfig, SimGenerator};

    fn candidates(n: usize, store: &ImageStore) -> Vec<PoolCandidate> {
        sim_pool(n, 3, 0.5, 11)
            .unwrap()
            .into_iter()
            .map(|r| r.into_candidate(store).unwrap())
            .collect()
    }

    fn run(cfg: &PipelineConfig, teacher: MockTeacherConfig, n: usize) -> PipelineOutput {
        let store = ImageStore::new();
        let pool = candidates(n, &store);
        let gen = SimGenerator::new("sim", SimConfig::default());
        let judge = OracleJudge::default();
        let teacher = MockTeacher::new("mock", teacher).unwrap();
        let b = SftBackends {
            generator: &gen,
            judge: &judge,
            teacher: &teacher,
            store: &store,
        };
        run_pipeline(&pool, &b, cfg, 5).unwrap()
    }

    #[test]
    fn reports_telescope_and_corpus_validates() {
        let cfg = PipelineConfig::default();
        let teacher = MockTeacherConfig {
            format_error_rate: 0.05,
            leak_rate: 0.1,
            judge_flip: 0.05,
            seed: 1,
            verbosity: 0,
        };
        let out = run(&cfg, teacher, 300);
        assert_eq!(out.reports.len(), 6);
        assert!(reports_telescope(&out.reports), "{:#?}", out.reports);
        assert!(validate_reports(&out.reports).is_empty());
        assert_eq!(out.reports[0].input, 300);
        assert!(!out.corpus.is_empty());
        let v = validate_corpus(&out.corpus, &cfg.screen(), &cfg.rubric);
        assert!(v.is_empty(), "{v:?}");
        assert!(out.corpus.iter().any(|t| t.rounds.len() == 2 && !t.terminal));
        assert!(out.corpus.iter().any(|t| t.rounds.len() == 2 && t.terminal));
        let leaks = out.reports[3].rejections.get("hint-leak").copied().unwrap_or(0);
        assert!(leaks > 0);
    }

    #[test]
    fn empty_pool_gives_empty_corpus() {
        let out = run(&PipelineConfig::default(), MockTeacherConfig::default(), 0);
        assert!(out.corpus.is_empty());
        assert_eq!(out.reports.len(), 6);
        assert!(out.reports.iter().all(|r| r.input == 0 && r.retained == 0));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let cfg = PipelineConfig::default();
        let t = MockTeacherConfig {
            format_error_rate: 0.1,
            seed: 3,
            ..Default::default()
        };
        assert_eq!(run(&cfg, t, 80), run(&cfg, t, 80));
    }
}
