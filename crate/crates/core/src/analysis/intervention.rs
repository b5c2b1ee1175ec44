// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::actstore::{validate_pair, ActivationRun, Role};
use crate::probes::ProbeStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Third {
    Lower,
    Middle,
    Upper,
}

impl Third {
    pub const ALL: [Third; 3] = [Third::Lower, Third::Middle, Third::Upper];

    pub fn as_str(self) -> &'static str {
        match self {
            Third::Lower => "lower",
            Third::Middle => "middle",
            Third::Upper => "upper",
        }
    }
}

/// Contiguous split of `0..num_layers`: the lower and middle thirds get
/// `⌊L/3⌋` layers each, the upper third the rest.
pub fn layer_thirds(num_layers: usize) -> [Range<usize>; 3] {
    let k = num_layers / 3;
    [0..k, k..2 * k, 2 * k..num_layers]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionDelta {
    /// `100 · (EM(intervened) − EM(baseline))`.
    pub behavior_pp: f64,
    pub thirds: [Range<usize>; 3],
    /// Mean probe-accuracy difference (intervened − baseline) over each
    /// third's layers; `None` when the third holds no probed layer.
    pub role_deltas: BTreeMap<Role, [Option<f64>; 3]>,
}

fn accuracy_by_layer(stats: &[ProbeStats], role: Role) -> Result<BTreeMap<usize, f64>, AnalysisError> {
    let mut out = BTreeMap::new();
    for s in stats.iter().filter(|s| s.role == role) {
        if out.insert(s.layer, s.mean).is_some() {
            return Err(AnalysisError::LayerMismatch(format!("duplicate {role} layer {}", s.layer)));
        }
    }
    Ok(out)
}

/// Behavioral and per-third probing change caused by an intervention.
///
/// The runs must pass [`validate_pair`]. A role contributes only when both
/// stat sets contain it, and then they must cover the same layers.
pub fn intervention_delta(
    baseline: &ActivationRun,
    baseline_stats: &[ProbeStats],
    intervened: &ActivationRun,
    intervened_stats: &[ProbeStats],
) -> Result<InterventionDelta, AnalysisError> {
    let report = validate_pair(baseline, intervened);
    if !report.is_compatible() {
        return Err(AnalysisError::IncompatibleRuns(report.issues.join("; ")));
    }
    let (base_em, int_em) = match (baseline.manifest.em_accuracy(), intervened.manifest.em_accuracy()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(AnalysisError::Empty),
    };
    let thirds = layer_thirds(baseline.manifest.num_layers);

    let mut role_deltas = BTreeMap::new();
    for role in Role::ALL {
        let (a, b) = (accuracy_by_layer(baseline_stats, role)?, accuracy_by_layer(intervened_stats, role)?);
        if a.is_empty() || b.is_empty() {
            continue;
        }
        if !a.keys().eq(b.keys()) {
            return Err(AnalysisError::LayerMismatch(format!(
                "{role} layers differ: {:?} vs {:?}",
                a.keys().collect::<Vec<_>>(),
                b.keys().collect::<Vec<_>>()
            )));
        }
        let deltas = thirds.clone().map(|range| {
            let diffs: Vec<f64> = a.range(range).map(|(layer, base)| b[layer] - base).collect();
            (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64)
        });
        role_deltas.insert(role, deltas);
    }
    Ok(InterventionDelta { behavior_pp: 100.0 * (int_em - base_em), thirds, role_deltas })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirds_partition_contiguously() {
        assert_eq!(layer_thirds(9), [0..3, 3..6, 6..9]);
        assert_eq!(layer_thirds(10), [0..3, 3..6, 6..10]);
        assert_eq!(layer_thirds(2), [0..0, 0..0, 0..2]);
        for l in 0..40 {
            let t = layer_thirds(l);
            assert_eq!(t[0].start, 0);
            assert_eq!(t[0].end, t[1].start);
            assert_eq!(t[1].end, t[2].start);
            assert_eq!(t[2].end, l);
        }
    }
}
