// SPDX-License-Identifier: MIT OR Apache-2.0

//! Statistics over probe results and run manifests.
//!
//! Every function here is pure and deterministic. Per-instance inputs are
//! aligned by position unless the signature says otherwise; predictions are
//! `Option<bool>` because an instance held out only in skipped folds has no
//! out-of-fold prediction.

mod agreement;
mod alignment;
mod behavior;
mod curves;
mod intervention;
mod kendall;
mod rescale;

pub use agreement::{
    correctness, cross_layer_agreement, variation_agreement, AgreementMatrix, PairAgreement, VariationAgreement,
};
pub use alignment::{alignment, behavior_alignment, AlignmentBreakdown, AlignmentCategory};
pub use behavior::{behavior_em, implied_label, normalize_answer, EmTally};
pub use curves::{layer_curves, layer_curves_from_values, LayerCurve};
pub use intervention::{intervention_delta, layer_thirds, InterventionDelta, Third};
pub use kendall::{instance_tau, kendall_tau};
pub use rescale::{interpolate_at, native_positions, relative_rescale};

/// Probe prediction for one instance; `None` when no held-out prediction exists.
pub type Prediction = Option<bool>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("need at least {needed} values, got {actual}")]
    TooShort { needed: usize, actual: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("instance sets differ: {0}")]
    InstanceMismatch(String),
    #[error("inconsistent layers: {0}")]
    LayerMismatch(String),
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
    #[error("no inputs")]
    Empty,
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), AnalysisError> {
    if expected == actual {
        Ok(())
    } else {
        Err(AnalysisError::LengthMismatch { what, expected, actual })
    }
}
