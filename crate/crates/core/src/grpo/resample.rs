use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;

use super::rollout::RolloutGroup;

/// Per-bucket quotas for keeping `g` of the trajectories whose round counts
/// are summarized in `counts` (round count -> members).
///
/// Non-empty buckets get `g / B` each and the remainder goes one apiece to
/// the smallest round counts. A bucket that cannot fill its quota gives all
/// its members; the shortfall is handed out one at a time, cycling over the
/// buckets with spare members in ascending round count.
///
/// Panics if the buckets hold fewer than `g` members in total.
pub fn bucket_quotas(counts: &BTreeMap<usize, usize>, g: usize) -> BTreeMap<usize, usize> {
    let live: Vec<(usize, usize)> = counts.iter().filter(|(_, &c)| c > 0).map(|(&n, &c)| (n, c)).collect();
    let total: usize = live.iter().map(|(_, c)| c).sum();
    assert!(total >= g, "need at least {g} trajectories, have {total}");
    if live.is_empty() {
        return BTreeMap::new();
    }
    let b = live.len();
    let (base, rem) = (g / b, g % b);
    let mut quota: Vec<usize> = Vec::with_capacity(b);
    let mut shortfall = 0;
    for (i, &(_, c)) in live.iter().enumerate() {
        let target = base + usize::from(i < rem);
        quota.push(target.min(c));
        shortfall += target.saturating_sub(c);
    }
    while shortfall > 0 {
        for (q, &(_, c)) in quota.iter_mut().zip(&live) {
            if shortfall > 0 && *q < c {
                *q += 1;
                shortfall -= 1;
            }
        }
    }
    live.iter().zip(quota).map(|(&(n, _), q)| (n, q)).collect()
}

/// Indices of the kept members, given each member's round count. Within a
/// bucket the members are drawn uniformly without replacement. The result
/// is in ascending index order.
pub fn resample_indices<R: Rng + ?Sized>(rounds: &[usize], g: usize, rng: &mut R) -> Vec<usize> {
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &n) in rounds.iter().enumerate() {
        buckets.entry(n).or_default().push(i);
    }
    let counts = buckets.iter().map(|(&n, v)| (n, v.len())).collect();
    let quotas = bucket_quotas(&counts, g);
    let mut out = Vec::with_capacity(g);
    for (n, members) in &buckets {
        let q = quotas[n];
        out.extend(sample(rng, members.len(), q).into_iter().map(|j| members[j]));
    }
    out.sort_unstable();
    out
}

/// Keeps exactly `g` trajectories, spread evenly over round counts.
pub fn resample_by_rounds<R: Rng + ?Sized>(group: &RolloutGroup, g: usize, rng: &mut R) -> RolloutGroup {
    let rounds: Vec<usize> = group.trajectories.iter().map(|t| t.n).collect();
    group.select(&resample_indices(&rounds, g, rng))
}
