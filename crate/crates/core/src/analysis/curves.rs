// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::actstore::Role;
use crate::probes::ProbeStats;

/// Mean accuracy per layer across a set of runs and its spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub role: Role,
    pub layers: Vec<usize>,
    pub mean: Vec<f64>,
    /// Largest absolute deviation from `mean`, in percentage points.
    pub spread_pp: Vec<f64>,
}

/// Curve from per-run accuracy vectors over the same layers.
pub fn layer_curves_from_values(role: Role, layers: &[usize], runs: &[&[f64]]) -> Result<LayerCurve, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    for r in runs {
        if r.len() != layers.len() {
            return Err(AnalysisError::LayerMismatch(format!(
                "{} layers expected, a run has {}",
                layers.len(),
                r.len()
            )));
        }
    }
    let k = runs.len() as f64;
    let mean: Vec<f64> = (0..layers.len()).map(|j| runs.iter().map(|r| r[j]).sum::<f64>() / k).collect();
    let spread_pp =
        (0..layers.len()).map(|j| runs.iter().map(|r| (r[j] - mean[j]).abs()).fold(0.0, f64::max) * 100.0).collect();
    Ok(LayerCurve { role, layers: layers.to_vec(), mean, spread_pp })
}

/// Mean and spread of one role's accuracy across keyed stat sets (e.g. one
/// per prompting variation). Every set must cover the same layers.
pub fn layer_curves<K: Ord>(stats: &BTreeMap<K, Vec<ProbeStats>>, role: Role) -> Result<LayerCurve, AnalysisError> {
    let mut layers: Option<Vec<usize>> = None;
    let mut runs = Vec::with_capacity(stats.len());
    for set in stats.values() {
        let mut rows: Vec<(usize, f64)> = set.iter().filter(|s| s.role == role).map(|s| (s.layer, s.mean)).collect();
        rows.sort_by_key(|r| r.0);
        let ls: Vec<usize> = rows.iter().map(|r| r.0).collect();
        if ls.windows(2).any(|w| w[0] == w[1]) {
            return Err(AnalysisError::LayerMismatch(format!("duplicate {role} layer in one stat set")));
        }
        match &layers {
            None => layers = Some(ls),
            Some(expected) if *expected != ls => {
                return Err(AnalysisError::LayerMismatch(format!("{role} layers {ls:?} differ from {expected:?}")));
            }
            _ => {}
        }
        runs.push(rows.into_iter().map(|r| r.1).collect::<Vec<f64>>());
    }
    let layers = layers.ok_or(AnalysisError::Empty)?;
    if layers.is_empty() {
        return Err(AnalysisError::LayerMismatch(format!("no {role} statistics")));
    }
    let views: Vec<&[f64]> = runs.iter().map(Vec::as_slice).collect();
    layer_curves_from_values(role, &layers, &views)
}
