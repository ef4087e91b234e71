//! Shows how an oversampled group of 12 rollouts is cut to 8 while keeping
//! round counts as even as the group allows.

use std::collections::BTreeMap;

use agentloop::grpo::{bucket_quotas, resample_indices};
use agentloop::seed::rng_for;

fn main() {
    let groups: [&[usize]; 4] = [
        &[1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3],
        &[1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 3],
        &[3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3],
        &[0, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3],
    ];
    for rounds in groups {
        let mut counts = BTreeMap::new();
        for &n in rounds {
            *counts.entry(n).or_insert(0) += 1;
        }
        let quotas = bucket_quotas(&counts, 8);
        let kept = resample_indices(rounds, 8, &mut rng_for(1, &[]));
        let kept_rounds: Vec<usize> = kept.iter().map(|&i| rounds[i]).collect();
        println!("available {counts:?}");
        println!("  quotas  {quotas:?}");
        println!("  kept    {kept_rounds:?}");
    }
}
