// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector};

use super::lbfgs;
use super::logistic::fit_logistic;
use super::mlp::{self, MlpShape};
use super::{logit_nll, sigmoid, ProbeConfig, ProbeError, ProbeKind, Standardizer};

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Linear {
        weights: DVector<f64>,
        bias: f64,
    },
    Mlp {
        shape: MlpShape,
        params: DVector<f64>,
    },
    /// Single-class training data: always predicts that class.
    Constant(bool),
}

/// A trained probe together with the standardization fitted on its training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub kind: ProbeKind,
    pub standardizer: Standardizer,
    params: Params,
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ProbeModel {
    /// The constant class when training labels were single-class.
    pub fn degenerate(&self) -> Option<bool> {
        match self.params {
            Params::Constant(c) => Some(c),
            _ => None,
        }
    }

    /// Logit of the positive class per row; ±∞ for a degenerate model.
    pub fn logits(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let z = self.standardizer.transform(x);
        match &self.params {
            Params::Linear { weights, bias } => {
                let mut out = z * weights;
                out.add_scalar_mut(*bias);
                out
            }
            Params::Mlp { shape, params } => mlp::logits(shape, params, &z),
            Params::Constant(c) => DVector::from_element(x.nrows(), if *c { f64::INFINITY } else { f64::NEG_INFINITY }),
        }
    }

    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.logits(x).iter().map(|&z| sigmoid(z)).collect()
    }

    /// Threshold 0.5; a probability of exactly 0.5 predicts the positive class.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<bool> {
        self.predict_proba(x).into_iter().map(|p| p >= 0.5).collect()
    }

    pub fn accuracy(&self, x: &DMatrix<f64>, y: &[bool]) -> f64 {
        let correct = self.predict(x).iter().zip(y).filter(|(p, t)| p == t).count();
        correct as f64 / y.len().max(1) as f64
    }

    /// Total negative log-likelihood of `y` in nats.
    pub fn nll(&self, x: &DMatrix<f64>, y: &[bool]) -> f64 {
        self.logits(x).iter().zip(y).map(|(&z, &t)| logit_nll(z, t)).sum()
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[bool]) -> Result<(), ProbeError> {
    if x.nrows() != y.len() {
        return Err(ProbeError::LengthMismatch { rows: x.nrows(), labels: y.len() });
    }
    if y.is_empty() {
        return Err(ProbeError::Empty);
    }
    for (col, column) in x.column_iter().enumerate() {
        if let Some(row) = column.iter().position(|v| !v.is_finite()) {
            return Err(ProbeError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Trains a probe on `features` (N × d) to predict `labels`.
///
/// Deterministic given `seed` (the seed only matters for MLP initialization).
/// Single-class labels produce a degenerate constant predictor.
pub fn train_probe(
    features: &DMatrix<f64>,
    labels: &[bool],
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<ProbeModel, ProbeError> {
    cfg.validate()?;
    check_inputs(features, labels)?;
    let standardizer =
        if cfg.standardize { Standardizer::fit(features) } else { Standardizer::identity(features.ncols()) };

    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Ok(ProbeModel {
            kind: cfg.kind,
            standardizer,
            params: Params::Constant(positives > 0),
            loss_history: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }

    let z = standardizer.transform(features);
    let model = match cfg.kind {
        ProbeKind::Linear => {
            let fit = fit_logistic(&z, labels, cfg.l2(), cfg.max_iterations, cfg.convergence_tol);
            ProbeModel {
                kind: cfg.kind,
                standardizer,
                params: Params::Linear { weights: fit.weights, bias: fit.bias },
                loss_history: fit.loss_history,
                iterations: fit.iterations,
                converged: fit.converged,
            }
        }
        ProbeKind::Mlp1 | ProbeKind::Mlp2 => {
            let shape = MlpShape::new(z.ncols(), cfg.hidden_width, cfg.kind.hidden_layers());
            let start = shape.init(seed);
            let l2 = cfg.l2();
            let min = lbfgs::minimize(
                |p| mlp::loss_and_grad(&shape, p, &z, labels, l2),
                start,
                cfg.max_iterations,
                cfg.convergence_tol,
            );
            ProbeModel {
                kind: cfg.kind,
                standardizer,
                params: Params::Mlp { shape, params: min.params },
                loss_history: min.loss_history,
                iterations: min.iterations,
                converged: min.converged,
            }
        }
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::seed::substream;

    /// Two spherical Gaussian clusters with means ±sep/2 on the first axis.
    fn clusters(n: usize, d: usize, sep: f64, seed: u64) -> (DMatrix<f64>, Vec<bool>) {
        let mut rng = substream(seed, &["clusters"]);
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let x = DMatrix::from_fn(n, d, |i, j| {
            let noise: f64 = rng.sample(StandardNormal);
            if j == 0 {
                noise + if labels[i] { sep / 2.0 } else { -sep / 2.0 }
            } else {
                noise
            }
        });
        (x, labels)
    }

    #[test]
    fn well_separated_clusters_train_to_high_accuracy() {
        let (x, y) = clusters(500, 8, 6.0, 1);
        let model = train_probe(&x, &y, &ProbeConfig::linear(), 0).unwrap();
        assert!(model.converged);
        assert!(model.accuracy(&x, &y) >= 0.99);
        for w in model.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let (x, _) = clusters(10, 3, 1.0, 2);
        let y = vec![true; 10];
        let model = train_probe(&x, &y, &ProbeConfig::linear(), 0).unwrap();
        assert_eq!(model.degenerate(), Some(true));
        assert!(model.predict(&x).iter().all(|&p| p));
    }

    #[test]
    fn rejects_non_finite_and_mismatched_inputs() {
        let (mut x, y) = clusters(10, 3, 1.0, 2);
        assert_eq!(
            train_probe(&x, &y[..9], &ProbeConfig::linear(), 0),
            Err(ProbeError::LengthMismatch { rows: 10, labels: 9 })
        );
        x[(4, 2)] = f64::NAN;
        assert_eq!(train_probe(&x, &y, &ProbeConfig::linear(), 0), Err(ProbeError::NonFinite { row: 4, col: 2 }));
    }

    #[test]
    fn mlp_is_deterministic_per_seed_and_fits() {
        let (x, y) = clusters(120, 4, 4.0, 3);
        let mut cfg = ProbeConfig::of_kind(ProbeKind::Mlp1);
        cfg.max_iterations = 100;
        let a = train_probe(&x, &y, &cfg, 5).unwrap();
        let b = train_probe(&x, &y, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.accuracy(&x, &y) > 0.95);
        for w in a.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn constant_feature_is_dropped_not_divided() {
        let (mut x, y) = clusters(50, 3, 4.0, 4);
        x.column_mut(1).fill(2.5);
        let model = train_probe(&x, &y, &ProbeConfig::linear(), 0).unwrap();
        assert_eq!(model.standardizer.dropped, vec![1]);
        assert!(model.predict_proba(&x).iter().all(|p| p.is_finite()));
    }
}
