use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::types::{Rejection, SftTrajectory, Source, StageReport};
use super::SftError;
use crate::seed::{label, rng_for};

/// One stratum of the corpus. `None` fields match anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTarget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<bool>,
    pub fraction: f64,
}

impl StratumTarget {
    pub fn new(source: Option<Source>, terminal: Option<bool>, fraction: f64) -> Self {
        Self {
            source,
            terminal,
            fraction,
        }
    }

    pub fn matches(&self, t: &SftTrajectory) -> bool {
        self.source.is_none_or(|s| s == t.source) && self.terminal.is_none_or(|b| b == t.terminal)
    }

    pub fn name(&self) -> String {
        let source = match self.source {
            None => "*",
            Some(Source::Open) => "open",
            Some(Source::Synthetic) => "synthetic",
        };
        let terminal = match self.terminal {
            None => "*",
            Some(true) => "terminal",
            Some(false) => "non-terminal",
        };
        format!("{source}/{terminal}")
    }
}

/// Four equal strata over source and termination.
pub fn default_strata() -> Vec<StratumTarget> {
    let mut out = Vec::new();
    for source in [Source::Open, Source::Synthetic] {
        for terminal in [true, false] {
            out.push(StratumTarget::new(Some(source), Some(terminal), 0.25));
        }
    }
    out
}

fn validate(targets: &[StratumTarget]) -> Result<(), SftError> {
    if targets.is_empty() {
        return Err(SftError::InvalidTargets("no strata".into()));
    }
    if targets.iter().any(|t| !(t.fraction >= 0.0 && t.fraction.is_finite())) {
        return Err(SftError::InvalidTargets("fractions must be finite and non-negative".into()));
    }
    let sum: f64 = targets.iter().map(|t| t.fraction).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SftError::InvalidTargets(format!("fractions sum to {sum}, not 1")));
    }
    Ok(())
}

/// Splits `size` by `fractions` with the largest-remainder rule; ties go to
/// the earlier stratum. Each count is within 1 of `size * fraction`.
pub fn allocate(fractions: &[f64], size: usize) -> Vec<usize> {
    let raw: Vec<f64> = fractions.iter().map(|f| f * size as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (raw[a] - raw[a].floor(), raw[b] - raw[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(size.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Target fractions after moving the mass of empty strata onto the
/// non-empty ones in proportion to their own targets.
pub fn effective_fractions(targets: &[StratumTarget], available: &[usize]) -> Vec<f64> {
    let live: f64 = targets
        .iter()
        .zip(available)
        .filter(|(_, &n)| n > 0)
        .map(|(t, _)| t.fraction)
        .sum();
    targets
        .iter()
        .zip(available)
        .map(|(t, &n)| if n > 0 && live > 0.0 { t.fraction / live } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub corpus: Vec<SftTrajectory>,
    pub report: StageReport,
    /// Requested count per stratum name.
    pub quotas: BTreeMap<String, usize>,
    /// Strata that were empty and had their mass redistributed.
    pub redistributed: Vec<String>,
}

fn assign(accepted: &[SftTrajectory], targets: &[StratumTarget]) -> Vec<Option<usize>> {
    accepted
        .iter()
        .map(|t| targets.iter().position(|s| s.matches(t)))
        .collect()
}

fn availability(assignment: &[Option<usize>], strata: usize) -> Vec<usize> {
    let mut available = vec![0; strata];
    for k in assignment.iter().flatten() {
        available[*k] += 1;
    }
    available
}

fn quotas_for(targets: &[StratumTarget], available: &[usize], size: usize) -> Option<Vec<usize>> {
    if size == 0 {
        return Some(vec![0; targets.len()]);
    }
    let fractions = effective_fractions(targets, available);
    if fractions.iter().all(|&f| f == 0.0) {
        return None;
    }
    Some(allocate(&fractions, size))
}

/// Stratified sample of exactly `size` trajectories. Each trajectory counts
/// toward the first stratum it matches. Within a stratum the choice is
/// uniform without replacement; the corpus keeps input order.
pub fn balanced_sample(
    accepted: &[SftTrajectory],
    targets: &[StratumTarget],
    size: usize,
    seed: u64,
) -> Result<SampleOutcome, SftError> {
    validate(targets)?;
    let assignment = assign(accepted, targets);
    let available = availability(&assignment, targets.len());
    let names: Vec<String> = targets.iter().map(StratumTarget::name).collect();
    let insufficient = |quotas: &[usize]| SftError::InsufficientStratum {
        requested: names.iter().cloned().zip(quotas.iter().copied()).collect(),
        available: names.iter().cloned().zip(available.iter().copied()).collect(),
    };
    let quotas = quotas_for(targets, &available, size).ok_or_else(|| {
        let naive = allocate(&targets.iter().map(|t| t.fraction).collect::<Vec<_>>(), size);
        insufficient(&naive)
    })?;
    if quotas.iter().zip(&available).any(|(q, a)| q > a) {
        return Err(insufficient(&quotas));
    }
    let mut chosen = Vec::with_capacity(size);
    for (k, &q) in quotas.iter().enumerate() {
        let members: Vec<usize> = assignment
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(k))
            .map(|(i, _)| i)
            .collect();
        let mut rng = rng_for(seed, &[label("balanced"), k as u64]);
        chosen.extend(sample(&mut rng, members.len(), q).into_iter().map(|j| members[j]));
    }
    chosen.sort_unstable();

    let mut report = StageReport::new("balanced_sample");
    let mut picked = vec![false; accepted.len()];
    for &i in &chosen {
        picked[i] = true;
    }
    for (i, a) in assignment.iter().enumerate() {
        if picked[i] {
            report.keep();
        } else if a.is_none() {
            report.reject(&Rejection::Unmatched);
        } else {
            report.reject(&Rejection::NotSampled);
        }
    }
    let redistributed = names
        .iter()
        .zip(targets.iter().zip(&available))
        .filter(|(_, (t, &n))| n == 0 && t.fraction > 0.0)
        .map(|(name, _)| name.clone())
        .collect();
    Ok(SampleOutcome {
        corpus: chosen.into_iter().map(|i| accepted[i].clone()).collect(),
        report,
        quotas: names.into_iter().zip(quotas).collect(),
        redistributed,
    })
}

/// Largest corpus size the strata can fill, at most the number accepted.
pub fn largest_feasible_size(accepted: &[SftTrajectory], targets: &[StratumTarget]) -> Result<usize, SftError> {
    validate(targets)?;
    let available = availability(&assign(accepted, targets), targets.len());
    let fits = |s: usize| {
        quotas_for(targets, &available, s).is_some_and(|q| q.iter().zip(&available).all(|(q, a)| q <= a))
    };
    Ok((0..=accepted.len()).rev().find(|&s| fits(s)).unwrap_or(0))
}
