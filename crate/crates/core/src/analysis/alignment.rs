// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{check_len, AnalysisError, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentCategory {
    BothCorrect,
    ProbeWrongOnly,
    ProbeCorrectOnly,
    BothWrong,
}

impl AlignmentCategory {
    pub const ALL: [AlignmentCategory; 4] = [
        AlignmentCategory::BothCorrect,
        AlignmentCategory::ProbeWrongOnly,
        AlignmentCategory::ProbeCorrectOnly,
        AlignmentCategory::BothWrong,
    ];

    pub fn of(probe_correct: bool, behavior_correct: bool) -> Self {
        match (probe_correct, behavior_correct) {
            (true, true) => AlignmentCategory::BothCorrect,
            (false, true) => AlignmentCategory::ProbeWrongOnly,
            (true, false) => AlignmentCategory::ProbeCorrectOnly,
            (false, false) => AlignmentCategory::BothWrong,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlignmentCategory::BothCorrect => "both_correct",
            AlignmentCategory::ProbeWrongOnly => "probe_wrong_only",
            AlignmentCategory::ProbeCorrectOnly => "probe_correct_only",
            AlignmentCategory::BothWrong => "both_wrong",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBreakdown {
    pub num_instances: usize,
    /// `counts[layer][category]`.
    pub counts: Vec<[usize; 4]>,
    /// `run_lengths[category][r]`: instances whose longest run of consecutive
    /// layers in that category is exactly `r`, for `r` in `0..=L`.
    pub run_lengths: [Vec<usize>; 4],
}

impl AlignmentBreakdown {
    pub fn proportion(&self, layer: usize, category: AlignmentCategory) -> f64 {
        self.counts[layer][category.index()] as f64 / self.num_instances as f64
    }

    pub fn run_length_fraction(&self, category: AlignmentCategory, r: usize) -> f64 {
        self.run_lengths[category.index()][r] as f64 / self.num_instances as f64
    }
}

/// Per-layer four-way split of probe correctness against behavior correctness.
/// A missing prediction counts as a probe error.
pub fn alignment(
    predictions: &[Vec<Prediction>],
    behavior_correct: &[bool],
    labels: &[bool],
) -> Result<AlignmentBreakdown, AnalysisError> {
    let n = labels.len();
    check_len("behavior", n, behavior_correct.len())?;
    for p in predictions {
        check_len("predictions per layer", n, p.len())?;
    }
    if n == 0 {
        return Err(AnalysisError::Empty);
    }
    let l = predictions.len();
    let category =
        |layer: usize, i: usize| AlignmentCategory::of(predictions[layer][i] == Some(labels[i]), behavior_correct[i]);

    let counts = (0..l)
        .map(|layer| {
            let mut c = [0usize; 4];
            (0..n).for_each(|i| c[category(layer, i).index()] += 1);
            c
        })
        .collect();

    let mut run_lengths: [Vec<usize>; 4] = std::array::from_fn(|_| vec![0; l + 1]);
    for i in 0..n {
        let mut longest = [0usize; 4];
        let mut current = [0usize; 4];
        for layer in 0..l {
            let c = category(layer, i).index();
            for (k, cur) in current.iter_mut().enumerate() {
                *cur = if k == c { *cur + 1 } else { 0 };
                longest[k] = longest[k].max(*cur);
            }
        }
        for (k, &r) in longest.iter().enumerate() {
            run_lengths[k][r] += 1;
        }
    }
    Ok(AlignmentBreakdown { num_instances: n, counts, run_lengths })
}

/// Per-layer fraction of instances whose probe prediction equals the label
/// implied by the generated answer. Missing values never agree.
pub fn behavior_alignment(
    predictions: &[Vec<Prediction>],
    implied_labels: &[Option<bool>],
) -> Result<Vec<f64>, AnalysisError> {
    let n = implied_labels.len();
    if n == 0 {
        return Err(AnalysisError::Empty);
    }
    predictions
        .iter()
        .map(|p| {
            check_len("predictions per layer", n, p.len())?;
            let agree = p.iter().zip(implied_labels).filter(|(a, b)| a.is_some() && a == b).count();
            Ok(agree as f64 / n as f64)
        })
        .collect()
}
