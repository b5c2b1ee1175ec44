// SPDX-License-Identifier: MIT OR Apache-2.0

//! Damped Newton solver for L2-regularized binary logistic regression.
//!
//! Objective: mean cross-entropy + (λ/2)·‖w‖² (bias unregularized).

use nalgebra::{DMatrix, DVector};

use super::{logit_nll, sigmoid};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LogisticFit {
    pub weights: DVector<f64>,
    pub bias: f64,
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn objective(x: &DMatrix<f64>, y: &[bool], l2: f64, w: &DVector<f64>, b: f64) -> (f64, DVector<f64>) {
    let mut z = x * w;
    z.add_scalar_mut(b);
    let n = y.len() as f64;
    let nll: f64 = z.iter().zip(y).map(|(&zi, &yi)| logit_nll(zi, yi)).sum::<f64>() / n;
    (nll + 0.5 * l2 * w.norm_squared(), z)
}

pub(crate) fn fit_logistic(x: &DMatrix<f64>, y: &[bool], l2: f64, max_iterations: usize, tol: f64) -> LogisticFit {
    let (n, d) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let positives = y.iter().filter(|&&v| v).count() as f64;
    let prior = ((positives + 0.5) / (nf + 1.0)).clamp(1e-6, 1.0 - 1e-6);

    let mut w = DVector::zeros(d);
    let mut b = (prior / (1.0 - prior)).ln();
    let (mut loss, mut z) = objective(x, y, l2, &w, b);
    let mut history = vec![loss];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iterations {
        let p = z.map(sigmoid);
        let residual = DVector::from_iterator(n, p.iter().zip(y).map(|(&pi, &yi)| pi - if yi { 1.0 } else { 0.0 }));
        let mut grad = DVector::zeros(d + 1);
        grad.rows_mut(0, d).copy_from(&(x.tr_mul(&residual) / nf + &w * l2));
        grad[d] = residual.sum() / nf;
        if grad.norm() <= tol {
            converged = true;
            break;
        }

        // Hessian = X̃ᵀ S X̃ / n + λ I (weights only); X̃ = [X | 1]
        let mut scaled = DMatrix::zeros(n, d + 1);
        for i in 0..n {
            let s = (p[i] * (1.0 - p[i]) / nf).sqrt();
            for j in 0..d {
                scaled[(i, j)] = x[(i, j)] * s;
            }
            scaled[(i, d)] = s;
        }
        let mut hessian = scaled.tr_mul(&scaled);
        for j in 0..d {
            hessian[(j, j)] += l2;
        }
        hessian[(d, d)] += 1e-12;
        let step = match hessian.cholesky() {
            Some(chol) => -chol.solve(&grad),
            None => -grad.clone(),
        };

        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let w_try = &w + step.rows(0, d) * t;
            let b_try = b + step[d] * t;
            let (loss_try, z_try) = objective(x, y, l2, &w_try, b_try);
            if loss_try <= loss + ARMIJO_C * t * slope {
                accepted = Some((w_try, b_try, loss_try, z_try));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((w_new, b_new, loss_new, z_new)) => {
                w = w_new;
                b = b_new;
                loss = loss_new;
                z = z_new;
                history.push(loss);
            }
            // no decrease representable in floating point: at the optimum to machine precision
            None => break,
        }
    }

    LogisticFit { weights: w, bias: b, loss_history: history, iterations, converged }
}
