// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::SliceRandom;

use crate::seed::{stable_hash, substream};

/// Control-task labels: a seeded pseudo-random label per instance id,
/// independent of the true labels. Exactly `⌊n/2⌋` ids are positive.
pub fn control_labels<S: AsRef<str>>(instance_ids: &[S], seed: u64) -> Vec<bool> {
    let mut ranked: Vec<(u64, usize)> =
        instance_ids.iter().enumerate().map(|(i, id)| (stable_hash(seed, &["control", id.as_ref()]), i)).collect();
    ranked.sort_unstable();
    let mut labels = vec![false; instance_ids.len()];
    for &(_, i) in ranked.iter().take(instance_ids.len() / 2) {
        labels[i] = true;
    }
    labels
}

/// Seeded permutation of `labels`.
pub fn shuffled_labels(labels: &[bool], seed: u64) -> Vec<bool> {
    let mut out = labels.to_vec();
    out.shuffle(&mut substream(seed, &["label-shuffle"]));
    out
}
