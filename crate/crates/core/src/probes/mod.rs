// SPDX-License-Identifier: MIT OR Apache-2.0

//! Probes on pooled activations.
//!
//! A probe is an L2-regularized logistic classifier, optionally with one or
//! two `tanh` hidden layers, trained full-batch to a gradient-norm tolerance.
//! [`cross_validate`] runs the folds × seeds protocol, [`control_labels`]
//! supplies the selectivity baseline and [`mdl_codelength`] the online
//! (prequential) codelength.

mod control;
mod cv;
mod lbfgs;
mod logistic;
mod mdl;
mod mlp;
mod model;
mod standardize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::actstore::Role;

pub use control::{control_labels, shuffled_labels};
pub use cv::{
    cross_validate, cross_validate_features, fold_assignment, layer_features, probe_layer, CvOptions, CvOutcome,
    FoldAccuracy, ProbeJob, SkippedFold,
};
pub use mdl::{
    mdl_codelength, mdl_codelength_features, MdlBlock, MdlOptions, MdlResult, MdlSchedule, DEFAULT_FRACTIONS,
    MIN_SELECTION_SIZE,
};
pub use model::{train_probe, ProbeModel};
pub use standardize::Standardizer;

/// Default fold count of the cross-validation protocol.
pub const DEFAULT_FOLDS: usize = 4;
/// Default probe seeds (one fold partition per seed).
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProbeError {
    #[error("features have {rows} rows but {labels} labels were given")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("no training instances")]
    Empty,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid probe configuration: {0}")]
    Config(String),
    #[error("{0} fold(s) leave no held-out data; need at least 2")]
    NoHeldOut(usize),
    #[error("no seeds given")]
    NoSeeds,
    #[error("run has no {0} tensor")]
    MissingRole(Role),
    #[error("layer {layer} out of range for a run with {num_layers} layers")]
    LayerOutOfRange { layer: usize, num_layers: usize },
    #[error("every fold was skipped; no accuracy could be measured")]
    NoUsableFolds,
    #[error("invalid MDL schedule: {0}")]
    Schedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Linear,
    /// One hidden layer.
    Mlp1,
    /// Two hidden layers.
    Mlp2,
}

impl ProbeKind {
    pub fn hidden_layers(self) -> usize {
        match self {
            ProbeKind::Linear => 0,
            ProbeKind::Mlp1 => 1,
            ProbeKind::Mlp2 => 2,
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeKind::Linear => "linear",
            ProbeKind::Mlp1 => "mlp1",
            ProbeKind::Mlp2 => "mlp2",
        })
    }
}

impl FromStr for ProbeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ProbeKind::Linear),
            "mlp1" => Ok(ProbeKind::Mlp1),
            "mlp2" => Ok(ProbeKind::Mlp2),
            _ => Err(format!("unknown probe kind {s:?}")),
        }
    }
}

/// Hidden width of the MLP probes.
pub const MLP_HIDDEN_WIDTH: usize = 100;
/// Default L2 strength of the linear probe.
pub const LINEAR_L2: f64 = 1e-3;
/// Default L2 strength of the MLP probes; `LINEAR_L2` lets them overfit.
pub const MLP_L2: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    pub hidden_width: usize,
    /// `None` selects [`LINEAR_L2`] or [`MLP_L2`] by kind.
    pub l2_strength: Option<f64>,
    pub max_iterations: usize,
    /// Gradient-norm tolerance.
    pub convergence_tol: f64,
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            kind: ProbeKind::Linear,
            hidden_width: MLP_HIDDEN_WIDTH,
            l2_strength: None,
            max_iterations: 500,
            convergence_tol: 1e-6,
            standardize: true,
        }
    }
}

impl ProbeConfig {
    pub fn linear() -> Self {
        Self::default()
    }

    pub fn of_kind(kind: ProbeKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn l2(&self) -> f64 {
        self.l2_strength.unwrap_or(match self.kind {
            ProbeKind::Linear => LINEAR_L2,
            ProbeKind::Mlp1 | ProbeKind::Mlp2 => MLP_L2,
        })
    }

    pub fn with_l2(&self, l2: f64) -> Self {
        Self { l2_strength: Some(l2), ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.kind != ProbeKind::Linear && self.hidden_width != MLP_HIDDEN_WIDTH {
            return Err(ProbeError::Config(format!(
                "hidden_width must be {MLP_HIDDEN_WIDTH} for {} probes, got {}",
                self.kind, self.hidden_width
            )));
        }
        if !(self.l2() >= 0.0 && self.l2().is_finite()) {
            return Err(ProbeError::Config(format!("l2_strength must be finite and >= 0, got {}", self.l2())));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(ProbeError::Config(format!("convergence_tol must be > 0, got {}", self.convergence_tol)));
        }
        if self.max_iterations == 0 {
            return Err(ProbeError::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Cross-validated statistics for one (layer, role).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub layer: usize,
    pub role: Role,
    pub probe: ProbeKind,
    /// One entry per evaluated (seed, fold).
    pub accuracies: Vec<FoldAccuracy>,
    /// Macro average over `accuracies`.
    pub mean: f64,
    pub stddev: f64,
    /// Correct predictions over all held-out predictions.
    pub pooled_accuracy: f64,
    pub control_mean: Option<f64>,
    pub mdl_codelength_bits: Option<f64>,
    pub mdl_compression: Option<f64>,
    pub skipped_folds: Vec<SkippedFold>,
    /// Largest number of zero-variance dimensions dropped in any training fold.
    pub max_dropped_dims: usize,
    /// Out-of-fold prediction per instance (storage order), majority over seeds.
    pub predictions: Vec<Option<bool>>,
}

impl ProbeStats {
    /// Accuracy on true labels minus accuracy on control labels.
    pub fn selectivity(&self) -> Option<f64> {
        self.control_mean.map(|c| self.mean - c)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Negative log-likelihood (nats) of `label` under logit `z`.
fn logit_nll(z: f64, label: bool) -> f64 {
    if label {
        softplus(-z)
    } else {
        softplus(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        ProbeConfig::default().validate().unwrap();
        ProbeConfig::of_kind(ProbeKind::Mlp2).validate().unwrap();
        let mut c = ProbeConfig::of_kind(ProbeKind::Mlp1);
        c.hidden_width = 50;
        assert!(c.validate().is_err());
        assert!(ProbeConfig { convergence_tol: 0.0, ..ProbeConfig::default() }.validate().is_err());
        assert!(ProbeConfig { l2_strength: Some(-1.0), ..ProbeConfig::default() }.validate().is_err());
        assert_eq!(ProbeConfig::default().l2(), LINEAR_L2);
        assert_eq!(ProbeConfig::of_kind(ProbeKind::Mlp1).l2(), MLP_L2);
        assert_eq!(ProbeConfig::of_kind(ProbeKind::Mlp1).with_l2(0.5).l2(), 0.5);
    }

    #[test]
    fn logistic_helpers_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(logit_nll(-800.0, true).is_finite());
        assert!((logit_nll(3.0, true) + sigmoid(3.0).ln()).abs() < 1e-12);
    }
}
