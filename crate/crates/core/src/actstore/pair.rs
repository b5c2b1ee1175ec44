// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;

use serde::Serialize;

use super::ActivationRun;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Compatibility {
    Identical,
    /// Same instances in a different order; `permutation[i]` is the index in
    /// the other run of the baseline's instance `i`.
    Reordered {
        permutation: Vec<usize>,
    },
    Incompatible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairReport {
    pub compatibility: Compatibility,
    pub issues: Vec<String>,
}

impl PairReport {
    pub fn is_compatible(&self) -> bool {
        !matches!(self.compatibility, Compatibility::Incompatible)
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        match &self.compatibility {
            Compatibility::Reordered { permutation } => Some(permutation),
            _ => None,
        }
    }
}

/// Compares two runs for alignment of task, layer count, hidden size and instances.
pub fn validate_pair(baseline: &ActivationRun, other: &ActivationRun) -> PairReport {
    let (a, b) = (&baseline.manifest, &other.manifest);
    let mut issues = Vec::new();
    if a.task != b.task {
        issues.push(format!("task differs: {} vs {}", a.task, b.task));
    }
    if a.num_layers != b.num_layers {
        issues.push(format!("num_layers differs: {} vs {}", a.num_layers, b.num_layers));
    }
    if a.hidden_dim != b.hidden_dim {
        issues.push(format!("hidden_dim differs: {} vs {}", a.hidden_dim, b.hidden_dim));
    }

    let position: HashMap<&str, usize> = b.instance_ids().enumerate().map(|(i, id)| (id, i)).collect();
    let permutation: Option<Vec<usize>> = if a.num_instances() == b.num_instances() {
        a.instance_ids().map(|id| position.get(id).copied()).collect()
    } else {
        None
    };
    if permutation.is_none() {
        issues.push(format!("instance sets differ ({} vs {} instances)", a.num_instances(), b.num_instances()));
    }

    let compatibility = match permutation {
        _ if !issues.is_empty() => Compatibility::Incompatible,
        Some(p) if p.iter().enumerate().all(|(i, &j)| i == j) => Compatibility::Identical,
        Some(permutation) => Compatibility::Reordered { permutation },
        None => Compatibility::Incompatible,
    };
    PairReport { compatibility, issues }
}

#[cfg(test)]
mod tests {
    use super::super::testing::small_run;
    use super::*;
    use crate::corpus::TaskKind;

    #[test]
    fn identical_manifests_are_compatible() {
        let run = small_run(3, 4, 2);
        let r = validate_pair(&run, &run.clone());
        assert_eq!(r.compatibility, Compatibility::Identical);
        assert!(r.issues.is_empty());
    }

    #[test]
    fn reordered_instances_report_permutation() {
        let run = small_run(3, 4, 2);
        let other = run.reordered(&[3, 1, 0, 2]);
        let r = validate_pair(&run, &other);
        let perm = r.permutation().unwrap().to_vec();
        assert_eq!(perm, vec![2, 1, 3, 0]);
        // applying the permutation restores the baseline order
        assert_eq!(other.reordered(&perm), run);
    }

    #[test]
    fn differing_dim_or_task_is_incompatible() {
        let run = small_run(3, 4, 2);
        let other = small_run(3, 4, 3);
        let r = validate_pair(&run, &other);
        assert_eq!(r.compatibility, Compatibility::Incompatible);
        assert!(r.issues[0].contains("hidden_dim"));

        let mut other = run.clone();
        other.manifest.task = TaskKind::Tom;
        assert!(!validate_pair(&run, &other).is_compatible());

        let fewer = small_run(3, 2, 2);
        assert!(!validate_pair(&run, &fewer).is_compatible());
    }
}
