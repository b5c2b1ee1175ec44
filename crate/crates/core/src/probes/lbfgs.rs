// SPDX-License-Identifier: MIT OR Apache-2.0

//! Limited-memory BFGS with Armijo backtracking, used for the MLP probes.

use std::collections::VecDeque;

use nalgebra::DVector;

const MEMORY: usize = 10;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub params: DVector<f64>,
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f`, which returns the objective and its gradient.
pub(crate) fn minimize<F>(mut f: F, start: DVector<f64>, max_iterations: usize, tol: f64) -> Minimum
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut x = start;
    let (mut fx, mut g) = f(&x);
    let mut history = vec![fx];
    let mut pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iterations {
        let gnorm = g.norm();
        if gnorm <= tol {
            converged = true;
            break;
        }

        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * s.dot(&q);
            q.axpy(-a, y, 1.0);
            alphas.push(a);
        }
        let gamma = match pairs.back() {
            Some((s, y, _)) => s.dot(y) / y.norm_squared(),
            None => 1.0 / gnorm,
        };
        q *= gamma;
        for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&q);
            q.axpy(a - b, s, 1.0);
        }
        let mut direction = -q;
        let mut slope = g.dot(&direction);
        if slope >= 0.0 {
            // memory produced a non-descent direction; restart from steepest descent
            pairs.clear();
            direction = -&g / gnorm;
            slope = g.dot(&direction);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let x_try = &x + &direction * t;
            let (f_try, g_try) = f(&x_try);
            if f_try.is_finite() && f_try <= fx + ARMIJO_C * t * slope {
                accepted = Some((x_try, f_try, g_try));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((x_new, f_new, g_new)) = accepted else { break };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);
    }

    Minimum { params: x, loss_history: history, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |v: &DVector<f64>| {
            let (a, b) = (v[0], v[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            (f, g)
        };
        let m = minimize(rosen, DVector::from_vec(vec![-1.2, 1.0]), 500, 1e-9);
        assert!(m.converged);
        assert!((m.params[0] - 1.0).abs() < 1e-6 && (m.params[1] - 1.0).abs() < 1e-6);
        for w in m.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
