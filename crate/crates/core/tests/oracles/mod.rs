// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent brute-force reference implementations shared by test targets.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeMap;

use instprobe::analysis::Prediction;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Tau-b from the O(n²) concordant/discordant/tie census.
pub fn brute_kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let sx = x[i].partial_cmp(&x[j]).unwrap();
            let sy = y[i].partial_cmp(&y[j]).unwrap();
            if sx == Ordering::Equal {
                tx += 1;
            }
            if sy == Ordering::Equal {
                ty += 1;
            }
            if sx != Ordering::Equal && sy != Ordering::Equal {
                if sx == sy {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if n0 == tx || n0 == ty {
        return None;
    }
    Some((c - d) as f64 / (((n0 - tx) * (n0 - ty)) as f64).sqrt())
}

/// Random vector pair; with `ties`, values come from a small integer range.
pub fn random_pair(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> (Vec<f64>, Vec<f64>) {
    let draw = |rng: &mut ChaCha8Rng| {
        if ties {
            rng.random_range(0..6) as f64
        } else {
            rng.random::<f64>() * 200.0 - 100.0
        }
    };
    let x = (0..n).map(|_| draw(rng)).collect();
    let y = (0..n).map(|_| draw(rng)).collect();
    (x, y)
}

pub fn random_predictions(rng: &mut ChaCha8Rng, n: usize) -> Vec<Prediction> {
    (0..n)
        .map(|_| match rng.random_range(0..9) {
            0 => None,
            k => Some(k % 2 == 0),
        })
        .collect()
}

pub fn random_bools(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random()).collect()
}

fn category(pred: Prediction, label: bool, behavior: bool) -> usize {
    match (pred == Some(label), behavior) {
        (true, true) => 0,
        (false, true) => 1,
        (true, false) => 2,
        (false, false) => 3,
    }
}

/// `counts[layer][category]` by direct tally.
pub fn alignment_counts(preds: &[Vec<Prediction>], behavior: &[bool], labels: &[bool]) -> Vec<[usize; 4]> {
    preds
        .iter()
        .map(|layer| {
            let mut c = [0; 4];
            for i in 0..labels.len() {
                c[category(layer[i], labels[i], behavior[i])] += 1;
            }
            c
        })
        .collect()
}

/// `run_lengths[category][r]` by checking every layer window of every instance.
pub fn alignment_run_lengths(preds: &[Vec<Prediction>], behavior: &[bool], labels: &[bool]) -> [Vec<usize>; 4] {
    let l = preds.len();
    let mut out: [Vec<usize>; 4] = std::array::from_fn(|_| vec![0; l + 1]);
    for i in 0..labels.len() {
        for (c, hist) in out.iter_mut().enumerate() {
            let mut longest = 0;
            for start in 0..l {
                for end in start + 1..=l {
                    if (start..end).all(|layer| category(preds[layer][i], labels[i], behavior[i]) == c) {
                        longest = longest.max(end - start);
                    }
                }
            }
            hist[longest] += 1;
        }
    }
    out
}

/// Entry `(a, b)` counts matching instances directly; diagonal included.
pub fn agreement_matrix<T: PartialEq>(preds: &[Vec<T>]) -> Vec<f64> {
    let l = preds.len();
    let n = preds.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(l * l);
    for a in 0..l {
        for b in 0..l {
            let same = (0..n).filter(|&i| preds[a][i] == preds[b][i]).count();
            out.push(if n == 0 { 1.0 } else { same as f64 / n as f64 });
        }
    }
    out
}

/// Pairwise rates (key order, a < b) and the all-agree rate, where "all
/// agree" means every pair of keys matches on the instance.
pub fn variation_rates<K: Ord, T: PartialEq>(values: &BTreeMap<K, BTreeMap<String, T>>) -> (Vec<f64>, f64) {
    let cols: Vec<&BTreeMap<String, T>> = values.values().collect();
    let ids: Vec<&String> = cols[0].keys().collect();
    let n = ids.len() as f64;
    let mut pairwise = Vec::new();
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            pairwise.push(ids.iter().filter(|id| cols[a][**id] == cols[b][**id]).count() as f64 / n);
        }
    }
    let all = ids
        .iter()
        .filter(|id| (0..cols.len()).all(|a| (0..cols.len()).all(|b| cols[a][**id] == cols[b][**id])))
        .count() as f64
        / n;
    (pairwise, all)
}
