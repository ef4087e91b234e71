//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.
//!
//! cargo test --release --test acceptance

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use agentloop::agent::{run_episode, EpisodeConfig, TokenSource, Trajectory};
use agentloop::backends::{judge_pair, ImageGenerator, ImageStore, Judge, PairWinner};
use agentloop::cli::RunSummary;
use agentloop::grpo::{
    bucket_quotas, grpo_loss_and_gradient, normalize_advantages, resample_indices, train, window_means,
    AdvantageSet, TrainerConfig,
};
use agentloop::reward::{combine, pairwise_reward, score_trajectory};
use agentloop::seed::rng_for;
use agentloop::sft::validate::validate_corpus;
use agentloop::sft::{
    filter_pool, run_pipeline, sim_pool, Diagnostics, MockTeacher, MockTeacherConfig, PipelineConfig,
    SftBackends, SftTrajectory, StratumTarget,
};
use agentloop::sim::{
    ConstraintQuery, OracleJudge, PositionBiasedJudge, PromptProgram, ReflectivePolicy, ScriptedPolicy,
    SimConfig, SimGenerator, SimImage, ToyPolicy,
};
use common::{random_policy, sampled_group, scored_trajectory, sim_queries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reward_table() -> Outcome {
    let table = [
        ((0.7, 0.0, 0.3), 1.0),
        ((0.7, -0.2, 0.3), 0.8),
        ((0.7, 0.0, 0.0), 0.7),
        ((0.7, -0.2, 0.0), 0.5),
        ((0.0, 0.0, 0.3), 0.15),
        ((0.0, -0.2, 0.3), -0.05),
        ((0.0, 0.0, 0.0), 0.0),
        ((0.0, -0.2, 0.0), -0.2),
    ];
    for ((p, f, q), want) in table {
        let got = combine(p, f, q).map_err(|e| e.to_string())?.r_total;
        ensure(got == want, || format!("({p}, {f}, {q}) -> {got}, want {want}"))?;
    }
    let pass = combine(0.7, 0.0, 0.3).map_err(|e| e.to_string())?.lambda;
    let fail = combine(0.0, 0.0, 0.3).map_err(|e| e.to_string())?.lambda;
    ensure(pass == 1.0 && fail == 0.5, || format!("lambda {pass} / {fail}"))?;
    Ok("8 combinations exact, lambda 1.0 / 0.5".into())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Step {
    Win,
    Tie,
    Loss,
}

fn pairwise_chain_rule() -> Outcome {
    let store = ImageStore::new();
    let judge = OracleJudge::default();
    let mut chains: Vec<Vec<Step>> = vec![vec![]];
    let mut all = Vec::new();
    for _ in 0..2 {
        let mut next = Vec::new();
        for c in &chains {
            for s in [Step::Win, Step::Tie, Step::Loss] {
                let mut c = c.clone();
                c.push(s);
                next.push(c);
            }
        }
        all.extend(chains);
        chains = next;
    }
    all.extend(chains);
    let mut checked = 0;
    for steps in &all {
        let mut scores = vec![2usize];
        for s in steps {
            let last = *scores.last().unwrap();
            scores.push(match s {
                Step::Win => last + 1,
                Step::Tie => last,
                Step::Loss => last - 1,
            });
        }
        let t = scored_trajectory(&store, &scores, 4);
        let want = if scores.len() >= 2 && steps.iter().all(|s| *s == Step::Win) { 0.3 } else { 0.0 };
        for seed in 0..16 {
            let got = pairwise_reward(&t, &judge, &store, &mut rng_for(seed, &[])).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("chain {steps:?} seed {seed}: {got}, want {want}"))?;
            checked += 1;
        }
    }
    let empty = scored_trajectory(&store, &[], 4);
    let r = pairwise_reward(&empty, &judge, &store, &mut rng_for(0, &[])).map_err(|e| e.to_string())?;
    ensure(r == 0.0, || "empty trajectory earned a pair bonus".into())?;
    Ok(format!("{} chains x 16 shuffles = {checked} checks", all.len()))
}

fn advantage_normalization() -> Outcome {
    let legal = [1.0, 0.8, 0.7, 0.5, 0.15, -0.05, 0.0, -0.2];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_mean, mut worst_std, mut uniform) = (0f64, 0f64, 0);
    let mut groups = 0;
    while groups < 1000 {
        let n = rng.gen_range(2..=16);
        let rewards: Vec<f64> = if rng.gen_bool(0.5) {
            (0..n).map(|_| legal[rng.gen_range(0..legal.len())]).collect()
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let adv = normalize_advantages(&rewards).map_err(|e| e.to_string())?.values;
        if rewards.iter().all(|&r| r == rewards[0]) {
            ensure(adv.iter().all(|&a| a == 0.0), || format!("uniform {rewards:?} -> {adv:?}"))?;
            uniform += 1;
            continue;
        }
        let mean = adv.iter().sum::<f64>() / n as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((std - 1.0).abs());
        groups += 1;
    }
    for r in [0.0, 0.7, -0.2, 1.0] {
        for n in [2, 8, 12] {
            let adv = normalize_advantages(&vec![r; n]).map_err(|e| e.to_string())?.values;
            ensure(adv.iter().all(|&a| a == 0.0), || format!("uniform {r} x {n} -> {adv:?}"))?;
        }
    }
    ensure(worst_mean < 1e-9 && worst_std < 1e-9, || {
        format!("max |mean| {worst_mean:e}, max |std-1| {worst_std:e}")
    })?;
    Ok(format!(
        "1000 groups: max |mean| {worst_mean:.1e}, max |std-1| {worst_std:.1e}; {} uniform groups all zero",
        uniform + 12
    ))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0f64;
    let mut clipped_instances = 0;
    for inst in 0..100u64 {
        let old = random_policy(&mut rng, 0.8);
        let group = sampled_group(&old, 8, 100 + inst);
        let mut new = old.clone();
        for w in &mut new.weights {
            *w += rng.gen_range(-0.3..0.3);
        }
        let adv = AdvantageSet {
            values: (0..group.len()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        let cfg = TrainerConfig {
            kl_coefficient: if inst % 2 == 0 { 0.0 } else { rng.gen_range(0.0..0.5) },
            ..TrainerConfig::default()
        };
        let (_, grad) = grpo_loss_and_gradient(&group, &adv, &new, &cfg).map_err(|e| e.to_string())?;
        let h = 1e-6;
        let mut fd = vec![0.0; grad.len()];
        for (i, slot) in fd.iter_mut().enumerate() {
            let mut plus = new.clone();
            plus.weights[i] += h;
            let mut minus = new.clone();
            minus.weights[i] -= h;
            let lp = grpo_loss_and_gradient(&group, &adv, &plus, &cfg).map_err(|e| e.to_string())?.0;
            let lm = grpo_loss_and_gradient(&group, &adv, &minus, &cfg).map_err(|e| e.to_string())?.0;
            *slot = (lp - lm) / (2.0 * h);
        }
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&grad).max(norm(&fd)).max(1e-12);
        worst = worst.max(rel);
        let ratios_outside = group.trajectories.iter().flat_map(|t| &t.token_stream).any(|tok| {
            tok.sample.as_ref().is_some_and(|s| {
                let r = (new.log_prob(&s.features, &s.allowed, s.action) - s.logprob).exp();
                !(0.8..=1.2).contains(&r)
            })
        });
        clipped_instances += usize::from(ratios_outside);
    }
    ensure(worst < 1e-5, || format!("max relative error {worst:e}"))?;
    Ok(format!(
        "100 instances, max relative error {worst:.2e}, {clipped_instances} with ratios outside the clip range"
    ))
}

fn masking_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mutated_tokens = 0;
    for trial in 0..100u64 {
        let old = random_policy(&mut rng, 0.8);
        let group = sampled_group(&old, 6, 500 + trial);
        let mut new = old.clone();
        for w in &mut new.weights {
            *w += rng.gen_range(-0.3..0.3);
        }
        let adv = normalize_advantages(&group.totals())
            .unwrap_or(AdvantageSet {
                values: vec![0.0; group.len()],
            });
        let adv = if adv.values.iter().all(|&a| a == 0.0) {
            AdvantageSet {
                values: (0..group.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        } else {
            adv
        };
        let cfg = TrainerConfig {
            kl_coefficient: 0.1 * (trial % 3) as f64,
            ..TrainerConfig::default()
        };
        let before = grpo_loss_and_gradient(&group, &adv, &new, &cfg).map_err(|e| e.to_string())?;
        let mut mutated = group.clone();
        let dim = new.feature_dim();
        for t in &mut mutated.trajectories {
            for tok in t.token_stream.iter_mut().filter(|t| t.source == TokenSource::Environment) {
                let len = rng.gen_range(0..40);
                tok.text = (0..len).map(|_| rng.gen_range('!'..='~')).collect();
                tok.sample = Some(agentloop::agent::SampleRecord {
                    features: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    allowed: vec![true; new.actions().size()],
                    action: 0,
                    logprob: rng.gen_range(-5.0..0.0),
                });
                mutated_tokens += 1;
            }
        }
        let after = grpo_loss_and_gradient(&mutated, &adv, &new, &cfg).map_err(|e| e.to_string())?;
        let same = before.0.to_bits() == after.0.to_bits()
            && before.1.len() == after.1.len()
            && before.1.iter().zip(&after.1).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || format!("trial {trial}: loss or gradient changed"))?;
    }
    Ok(format!("100 trials, {mutated_tokens} environment tokens mutated, bitwise equal"))
}

/// Base quotas: as even as possible, larger values on the smallest round counts.
fn oracle_base(b: usize, g: usize) -> Vec<usize> {
    let mut found = Vec::new();
    let lo = g / b;
    for mask in 0..(1u32 << b) {
        let v: Vec<usize> = (0..b).map(|i| lo + usize::from(mask & (1 << i) != 0)).collect();
        let prefix = v.windows(2).all(|w| w[0] >= w[1]);
        if v.iter().sum::<usize>() == g && prefix {
            found.push(v);
        }
    }
    assert_eq!(found.len(), 1, "base quota not unique for B={b}");
    found.pop().unwrap()
}

/// Extras for the shortfall: cycling over buckets with spare capacity in
/// ascending order is the same as levelling extras up to some t, with one
/// more for a prefix of the buckets that can take it.
fn is_round_robin(e: &[usize], spare: &[usize]) -> bool {
    (0..=12).any(|t| {
        let mut prefix_open = true;
        spare.iter().zip(e).all(|(&s, &x)| {
            let level = s.min(t);
            if s > t && prefix_open && x == t + 1 {
                true
            } else if x == level {
                if s > t {
                    prefix_open = false;
                }
                true
            } else {
                false
            }
        })
    })
}

fn enumerate_extras(spare: &[usize], total: usize) -> Vec<Vec<usize>> {
    fn rec(spare: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == spare.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for x in 0..=spare[cur.len()].min(left) {
            cur.push(x);
            rec(spare, left - x, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(spare, total, &mut Vec::new(), &mut out);
    out
}

fn resampler_quotas() -> Outcome {
    let g = 8;
    let mut cases = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for c0 in 0..=12usize {
        for c1 in 0..=12 - c0 {
            for c2 in 0..=12 - c0 - c1 {
                for c3 in 0..=12 - c0 - c1 - c2 {
                    let total = c0 + c1 + c2 + c3;
                    if total < g {
                        continue;
                    }
                    let counts: BTreeMap<usize, usize> =
                        [(0, c0), (1, c1), (2, c2), (3, c3)].into_iter().filter(|&(_, c)| c > 0).collect();
                    let caps: Vec<usize> = counts.values().copied().collect();
                    let base = oracle_base(caps.len(), g);
                    let capped: Vec<usize> = base.iter().zip(&caps).map(|(&v, &c)| v.min(c)).collect();
                    let shortfall = g - capped.iter().sum::<usize>();
                    let spare: Vec<usize> = caps.iter().zip(&capped).map(|(c, p)| c - p).collect();
                    let valid: Vec<Vec<usize>> = enumerate_extras(&spare, shortfall)
                        .into_iter()
                        .filter(|e| is_round_robin(e, &spare))
                        .collect();
                    ensure(valid.len() == 1, || format!("{counts:?}: {} oracle solutions", valid.len()))?;
                    let want: Vec<usize> = capped.iter().zip(&valid[0]).map(|(p, e)| p + e).collect();
                    let got: Vec<usize> = bucket_quotas(&counts, g).values().copied().collect();
                    ensure(got == want, || format!("{counts:?}: quotas {got:?}, oracle {want:?}"))?;
                    if shortfall == 0 {
                        let (lo, hi) = (got.iter().min().unwrap(), got.iter().max().unwrap());
                        ensure(hi - lo <= 1, || format!("{counts:?}: uneven {got:?}"))?;
                    }

                    let rounds: Vec<usize> =
                        counts.iter().flat_map(|(&n, &c)| std::iter::repeat_n(n, c)).collect();
                    let kept = resample_indices(&rounds, g, &mut rng);
                    ensure(kept.len() == g, || format!("{counts:?}: kept {}", kept.len()))?;
                    ensure(kept.windows(2).all(|w| w[0] < w[1]), || "duplicate indices".into())?;
                    let mut per = BTreeMap::new();
                    for &i in &kept {
                        *per.entry(rounds[i]).or_insert(0) += 1;
                    }
                    let per: Vec<usize> = counts.keys().map(|n| per.get(n).copied().unwrap_or(0)).collect();
                    ensure(per == want, || format!("{counts:?}: drew {per:?}, quotas {want:?}"))?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} round-count multisets (G' = 8..12) match the oracle"))
}

fn shuffle_debiasing() -> Outcome {
    let store = ImageStore::new();
    let t = scored_trajectory(&store, &[1, 2], 3);
    let (a, b) = (&t.rounds[0].image, &t.rounds[1].image);
    let mut rng = rng_for(2024, &[]);
    let mut later = 0;
    for _ in 0..1000 {
        let r = judge_pair(&PositionBiasedJudge, &store, a, b, &mut rng).map_err(|e| e.to_string())?;
        later += usize::from(r.winner == PairWinner::Second);
    }
    let share = later as f64 / 1000.0;
    ensure((share - 0.5).abs() <= 0.04, || format!("later image won {share:.3}"))?;
    Ok(format!("later image won {:.1}% of 1000", share * 100.0))
}

fn simulator_fidelity() -> Outcome {
    let sim = SimConfig::default();
    let gen = SimGenerator::new("sim", sim);
    let judge = OracleJudge::default();
    let q = ConstraintQuery::sample(3, &mut rng_for(8, &[])).map_err(|e| e.to_string())?;
    let query = q.to_query("fidelity");
    let oracle_p = |e: u8| (0.35 + 0.25 * f64::from(e)).clamp(0.0, 0.98);
    let n = 100_000u64;
    let mut worst_attr = 0f64;
    let mut worst_pass = 0f64;
    for emphasis in [[0u8, 0, 0], [1, 1, 1], [2, 2, 2], [0, 1, 2]] {
        let text = PromptProgram {
            clauses: q.clauses(),
            emphasis: emphasis.to_vec(),
            verbosity: 0,
        }
        .render();
        let mut hits = [0u64; 3];
        let mut passes = 0u64;
        for s in 0..n {
            let bytes = gen.generate(&text, s).map_err(|e| e.to_string())?.bytes;
            let img = SimImage::from_bytes(&bytes).ok_or("undecodable image")?;
            for (h, &sat) in hits.iter_mut().zip(&img.satisfied) {
                *h += u64::from(sat);
            }
            passes += u64::from(judge.judge_point(&query, &bytes, &[]).map_err(|e| e.to_string())?.pass);
        }
        for (j, &h) in hits.iter().enumerate() {
            let err = (h as f64 / n as f64 - oracle_p(emphasis[j])).abs();
            worst_attr = worst_attr.max(err);
        }
        let product: f64 = emphasis.iter().map(|&e| oracle_p(e)).product();
        worst_pass = worst_pass.max((passes as f64 / n as f64 - product).abs());
    }
    let steep = SimConfig { g: 0.5, ..sim };
    ensure(steep.satisfaction_probability(2) == 0.98, || "ceiling not applied".into())?;
    ensure(worst_attr <= 0.005 && worst_pass <= 0.01, || {
        format!("attribute error {worst_attr:.4}, pass error {worst_pass:.4}")
    })?;
    Ok(format!(
        "4 emphasis settings x 100k: max attribute error {worst_attr:.4}, max pass error {worst_pass:.4}"
    ))
}

fn reflective_reward(policy: ReflectivePolicy, episodes: u64) -> f64 {
    let sim = SimConfig::default();
    let (gen, judge, store) = (SimGenerator::new("sim", sim), OracleJudge::default(), ImageStore::new());
    let queries = sim_queries(episodes as usize, sim.k, 77);
    let total: f64 = queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let t = run_episode(q, &policy, &gen, &judge, &store, &EpisodeConfig::new(3, i as u64)).unwrap();
            score_trajectory(&t, &judge, &store, i as u64).r_total
        })
        .sum();
    total / episodes as f64
}

fn rl_improvement() -> Outcome {
    let cfg = TrainerConfig {
        seed: 7,
        ..TrainerConfig::default()
    };
    let sim = SimConfig::default();
    let mut rounds_trace = Vec::new();
    let out = train(&cfg, &sim, ToyPolicy::zeros(sim.k, cfg.n_max), &mut |m| rounds_trace.push(m.mean_rounds))
        .map_err(|e| e.to_string())?;
    ensure(out.metrics.len() == 200 && rounds_trace.len() == 200, || "trace length".into())?;
    ensure(rounds_trace.iter().all(|r| r.is_finite() && (0.0..=3.0).contains(r)), || {
        "mean-rounds trace out of range".into()
    })?;
    let (first, last) = window_means(&out.metrics, 20, |m| m.mean_reward).ok_or("too few iterations")?;
    let (r_first, r_last) = window_means(&out.metrics, 20, |m| m.mean_rounds).ok_or("too few iterations")?;
    let oracle = [
        ReflectivePolicy { initial: 0, step: 1 },
        ReflectivePolicy { initial: 0, step: 2 },
        ReflectivePolicy { initial: 1, step: 1 },
        ReflectivePolicy { initial: 2, step: 1 },
    ]
    .into_iter()
    .map(|p| reflective_reward(p, 1000))
    .fold(f64::MIN, f64::max);
    ensure(oracle - first >= 0.2, || format!("oracle headroom {:.3} below 0.2", oracle - first))?;
    ensure(last - first >= 0.2, || format!("gain {:.3} (first {first:.3}, last {last:.3})", last - first))?;
    Ok(format!(
        "reward {first:.3} -> {last:.3} (gain {:+.3}); rounds {r_first:.2} -> {r_last:.2}; reflective oracle {oracle:.3}",
        last - first
    ))
}

fn round_scaling() -> Outcome {
    let sim = SimConfig::default();
    let (gen, judge, store) = (SimGenerator::new("sim", sim), OracleJudge::default(), ImageStore::new());
    let policy = ReflectivePolicy::default();
    let ts: Vec<Trajectory> = sim_queries(1000, sim.k, 10)
        .iter()
        .enumerate()
        .map(|(i, q)| run_episode(q, &policy, &gen, &judge, &store, &EpisodeConfig::new(3, i as u64)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let p = RunSummary::of(&ts, 3).pass_rate_by_round;
    ensure(p[1] > p[0] && p[2] >= p[1], || format!("pass by round {p:?}"))?;
    Ok(format!("pass by round {:.3} / {:.3} / {:.3}", p[0], p[1], p[2]))
}

fn sft_backends_run(teacher: MockTeacherConfig, cfg: &PipelineConfig, pool_size: usize, seed: u64) -> Result<(Vec<SftTrajectory>, Vec<agentloop::sft::StageReport>), String> {
    let store = ImageStore::new();
    let pool = sim_pool(pool_size, 3, 0.5, seed)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| r.into_candidate(&store))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let gen = SimGenerator::new("sim", SimConfig::default());
    let judge = OracleJudge::default();
    let teacher = MockTeacher::new("teacher", teacher)?;
    let b = SftBackends {
        generator: &gen,
        judge: &judge,
        teacher: &teacher,
        store: &store,
    };
    let out = run_pipeline(&pool, &b, cfg, seed).map_err(|e| e.to_string())?;
    Ok((out.corpus, out.reports))
}

fn sft_statistics() -> Outcome {
    // Pool screen: a candidate survives when all three generations fail.
    let store = ImageStore::new();
    let pool = sim_pool(1000, 3, 0.5, 21)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| r.into_candidate(&store))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let gen = SimGenerator::new("sim", SimConfig::default());
    let (_, report) = filter_pool(&pool, &gen, &OracleJudge::default(), &store, 21);
    let p = 0.35f64.powi(3);
    let expected = (1.0 - p).powi(3);
    let retained = report.retained as f64 / 1000.0;
    ensure((retained - expected).abs() <= 0.03, || format!("retention {retained:.3}, expected {expected:.3}"))?;

    // Full chain with a noisy teacher.
    let noisy = MockTeacherConfig {
        format_error_rate: 0.05,
        leak_rate: 0.1,
        judge_flip: 0.05,
        seed: 4,
        verbosity: 0,
    };
    let cfg = PipelineConfig::default();
    let (corpus, reports) = sft_backends_run(noisy, &cfg, 500, 9)?;
    ensure(reports.len() == 6 && reports[0].input == 500, || "stage count or pool size".into())?;
    for r in &reports {
        let rejected: usize = r.rejections.values().sum();
        ensure(r.input == r.retained + rejected, || format!("{} does not reconcile", r.stage))?;
    }
    for w in reports.windows(2) {
        ensure(w[0].retained == w[1].input, || format!("{} -> {} breaks the chain", w[0].stage, w[1].stage))?;
    }
    ensure(reports[5].retained == corpus.len(), || "corpus size differs from the last report".into())?;

    let mut tokens = 0;
    for t in &corpus {
        let images: Vec<String> = t.rounds.iter().map(|r| agentloop::agent::image_token_text(&r.image)).collect();
        for tok in &t.tokens {
            let is_image = images.contains(&tok.text);
            let want = if is_image { 0 } else { 1 };
            let source = if is_image { TokenSource::Environment } else { TokenSource::Policy };
            ensure(tok.loss_mask == want && tok.source == source, || format!("{}: bad mask on {:?}", t.id, tok.text))?;
            tokens += 1;
        }
    }
    let violations = validate_corpus(&corpus, &cfg.screen(), &cfg.rubric);
    ensure(violations.is_empty(), || format!("{} violations", violations.len()))?;

    // Stratification on terminal vs non-terminal.
    let halves = PipelineConfig {
        strata: vec![
            StratumTarget {
                source: None,
                terminal: Some(true),
                fraction: 0.5,
            },
            StratumTarget {
                source: None,
                terminal: Some(false),
                fraction: 0.5,
            },
        ],
        corpus_size: Some(120),
        ..PipelineConfig::default()
    };
    let (halved, _) = sft_backends_run(MockTeacherConfig::default(), &halves, 500, 3)?;
    let terminal = halved.iter().filter(|t| t.terminal).count() as i64;
    let non_terminal = halved.len() as i64 - terminal;
    ensure((terminal - 60).abs() <= 1 && (non_terminal - 60).abs() <= 1, || {
        format!("strata {terminal}/{non_terminal}, want 60/60")
    })?;

    // Planted diagnostic rates.
    let sim = SimConfig::default();
    let (g, j, s) = (SimGenerator::new("sim", sim), OracleJudge::default(), ImageStore::new());
    let q = &sim_queries(1, 3, 1)[0];
    let broken = run_episode(q, &ScriptedPolicy::new(vec![vec!["no tool call here".into()]]), &g, &j, &s, &EpisodeConfig::new(3, 1))
        .map_err(|e| e.to_string())?;
    let clean = run_episode(q, &ReflectivePolicy::default(), &g, &j, &s, &EpisodeConfig::new(3, 1)).map_err(|e| e.to_string())?;
    ensure(broken.has_tool_error() && !clean.has_tool_error(), || "planting failed".into())?;
    let mut planted = vec![broken; 334];
    planted.extend(std::iter::repeat_n(clean.clone(), 2500 - 334));
    let d = Diagnostics::of_trajectories(&planted);
    ensure(d.error_rate == 334.0 / 2500.0 && d.table().contains("13.36%"), || format!("error rate {}", d.error_rate))?;
    let d0 = Diagnostics::of_trajectories(&vec![clean; 50]);
    ensure(d0.error_rate == 0.0 && d0.table().contains("0.00%"), || "error-free corpus".into())?;
    let identity = Diagnostics::of_corpus(&corpus);
    ensure(identity.word_diff_leq5_rate == 1.0, || format!("identity rewrite {}", identity.word_diff_leq5_rate))?;

    Ok(format!(
        "retention {retained:.3} vs {expected:.3}; 6 reports telescope; {tokens} tokens masked correctly; strata {terminal}/{non_terminal}; 13.36% / 0.00% / 100% reproduced"
    ))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_agentloop"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    std::fs::write(
        dir.join("config.json"),
        r#"{
  "seed": 12,
  "backends": {
    "generator": {"name": "sim", "kind": "simulated"},
    "judge": {"name": "judge", "kind": "noisy-oracle", "flip_probability": 0.1, "seed": 3},
    "teacher": {"name": "teacher", "kind": "mock", "format_error_rate": 0.05, "leak_rate": 0.1, "judge_flip": 0.05, "seed": 2}
  },
  "agent": {"num_queries": 40},
  "trainer": {"iterations": 20, "batch_size": 8},
  "pipeline": {"pool_size": 200}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut files = 0;
    for cmd in [
        vec!["run"],
        vec!["train"],
        vec!["build-sft"],
        vec!["diagnose", "--input", "{out}/trajectories.jsonl"],
        vec!["validate", "--input", "{out}/corpus.jsonl", "--reports", "{out}/reports.json"],
    ] {
        let mut runs = Vec::new();
        for rep in ["a", "b"] {
            let out = format!("out-{rep}");
            let mut args: Vec<String> = cmd.iter().map(|a| a.replace("{out}", "out-a")).collect();
            args.extend(["--config".into(), "config.json".into(), "--out".into(), out.clone()]);
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let stdout = String::from_utf8_lossy(&run_cli(dir, &args)?).replace("out-a", "OUT").replace("out-b", "OUT");
            runs.push((stdout, dir_contents(&dir.join(&out))));
        }
        ensure(runs[0] == runs[1], || format!("{} differs between runs", cmd[0]))?;
        files = runs[0].1.len();
    }
    Ok(format!("run, train, build-sft, diagnose, validate byte-identical ({files} output files)"))
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "reward table exactness", limit: secs(1), run: reward_table },
        Criterion { id: 2, name: "pairwise chain rule", limit: secs(1), run: pairwise_chain_rule },
        Criterion { id: 3, name: "advantage normalization", limit: secs(5), run: advantage_normalization },
        Criterion { id: 4, name: "gradient fidelity", limit: secs(30), run: gradient_fidelity },
        Criterion { id: 5, name: "masking soundness", limit: secs(10), run: masking_soundness },
        Criterion { id: 6, name: "resampler quotas", limit: secs(10), run: resampler_quotas },
        Criterion { id: 7, name: "shuffle debiasing", limit: secs(5), run: shuffle_debiasing },
        Criterion { id: 8, name: "simulator fidelity", limit: secs(30), run: simulator_fidelity },
        Criterion { id: 9, name: "RL improvement", limit: secs(120), run: rl_improvement },
        Criterion { id: 10, name: "test-time round scaling", limit: secs(30), run: round_scaling },
        Criterion { id: 11, name: "SFT pipeline statistics", limit: secs(60), run: sft_statistics },
        Criterion { id: 12, name: "CLI determinism", limit: secs(60), run: cli_determinism },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || c.id.to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let result = (c.run)();
        let took = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if took <= c.limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {took:.1?}, limit {:?}", c.limit)),
            Err(e) => ("FAIL", e),
        };
        failed += usize::from(status == "FAIL");
        println!("{status} {:>2} {:<26} {:>8.2?}  {detail}", c.id, c.name, took);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
