// SPDX-License-Identifier: MIT OR Apache-2.0

//! Kendall's tau-b in O(n log n) (Knight's algorithm).

use std::cmp::Ordering;

use super::{check_len, AnalysisError, Prediction};

fn pairs(t: u64) -> u64 {
    t * t.saturating_sub(1) / 2
}

/// Sum of `t(t-1)/2` over runs of equal values in an already sorted sequence.
fn tied_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], eq: F) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += pairs(run);
            run = 1;
        }
    }
    total + if sorted.is_empty() { 0 } else { pairs(run) }
}

/// Stable merge sort of `v` by value; returns the number of strict inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], &mut buf[..mid]) + sort_count_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Tie-corrected Kendall rank correlation.
///
/// `Ok(None)` when either vector is constant. Errors on unequal lengths,
/// fewer than two values, or NaN.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<Option<f64>, AnalysisError> {
    check_len("kendall_tau y", x.len(), y.len())?;
    let n = x.len();
    if n < 2 {
        return Err(AnalysisError::TooShort { needed: 2, actual: n });
    }
    if let Some(i) = x.iter().chain(y).position(|v| v.is_nan()) {
        return Err(AnalysisError::NonFinite(i % n));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(y[a].partial_cmp(&y[b]).unwrap()));
    let tie_x = tied_pairs(&idx, |&a, &b| x[a] == x[b]);
    let tie_xy = tied_pairs(&idx, |&a, &b| x[a] == x[b] && y[a] == y[b]);

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let tie_y = tied_pairs(&ys, |a, b| a.partial_cmp(b) == Some(Ordering::Equal));

    let total = pairs(n as u64);
    let (dx, dy) = (total - tie_x, total - tie_y);
    if dx == 0 || dy == 0 {
        return Ok(None);
    }
    let numerator = total as i64 - tie_x as i64 - tie_y as i64 + tie_xy as i64 - 2 * swaps as i64;
    Ok(Some(numerator as f64 / ((dx as f64) * (dy as f64)).sqrt()))
}

/// Instance-level tau between binary probe correctness and behavior correctness.
/// A missing prediction counts as incorrect.
pub fn instance_tau(
    predictions: &[Prediction],
    labels: &[bool],
    behavior_correct: &[bool],
) -> Result<Option<f64>, AnalysisError> {
    check_len("labels", predictions.len(), labels.len())?;
    check_len("behavior", predictions.len(), behavior_correct.len())?;
    let probe: Vec<f64> = predictions.iter().zip(labels).map(|(p, &l)| (*p == Some(l)) as u8 as f64).collect();
    let behavior: Vec<f64> = behavior_correct.iter().map(|&b| b as u8 as f64).collect();
    kendall_tau(&probe, &behavior)
}
