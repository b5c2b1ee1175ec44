// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fully connected `tanh` probes with a single logit output.
//!
//! Parameters live in one flat vector, layer by layer: the row-major
//! `out × in` weight matrix followed by the `out` biases.

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use rand_distr::{Distribution, Normal};

use super::{logit_nll, sigmoid};
use crate::seed::substream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct MlpShape {
    /// Input width, hidden widths, then 1.
    pub sizes: Vec<usize>,
}

impl MlpShape {
    pub fn new(input: usize, hidden: usize, hidden_layers: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(hidden, hidden_layers));
        sizes.push(1);
        MlpShape { sizes }
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Borrowed `(weights, bias)` per layer. The row-major `out × in` block
    /// is read as its column-major transpose, `in × out`.
    pub fn unpack<'a>(&self, params: &'a DVector<f64>) -> Vec<(DMatrixView<'a, f64>, DVectorView<'a, f64>)> {
        let mut offset = 0;
        let p = params.as_slice();
        self.sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = DMatrixView::from_slice(&p[offset..offset + fan_out * fan_in], fan_in, fan_out);
                offset += fan_out * fan_in;
                let bias = DVectorView::from_slice(&p[offset..offset + fan_out], fan_out);
                offset += fan_out;
                (weights, bias)
            })
            .collect()
    }

    /// Gaussian weights with variance 1/fan_in, zero biases.
    pub fn init(&self, seed: u64) -> DVector<f64> {
        let mut rng = substream(seed, &["mlp-init"]);
        let mut params = Vec::with_capacity(self.num_params());
        for w in self.sizes.windows(2) {
            let normal = Normal::new(0.0, (1.0 / w[0].max(1) as f64).sqrt()).unwrap();
            params.extend((0..w[0] * w[1]).map(|_| normal.sample(&mut rng)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        DVector::from_vec(params)
    }
}

type Layer<'a> = (DMatrixView<'a, f64>, DVectorView<'a, f64>);

fn affine(a: &DMatrix<f64>, weights_t: &DMatrixView<f64>, bias: &DVectorView<f64>) -> DMatrix<f64> {
    let mut z = a * weights_t;
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col.add_scalar_mut(bias[j]);
    }
    z
}

/// Activations of every hidden layer and the final logits.
fn forward(layers: &[Layer], x: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
    let mut acts: Vec<DMatrix<f64>> = Vec::with_capacity(layers.len() - 1);
    for (w, b) in &layers[..layers.len() - 1] {
        let mut z = affine(acts.last().unwrap_or(x), w, b);
        z.apply(|v| *v = v.tanh());
        acts.push(z);
    }
    let (w, b) = layers.last().unwrap();
    let logits = affine(acts.last().unwrap_or(x), w, b).column(0).into_owned();
    (acts, logits)
}

pub(crate) fn logits(shape: &MlpShape, params: &DVector<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    forward(&shape.unpack(params), x).1
}

/// Regularized mean cross-entropy and its gradient.
pub(crate) fn loss_and_grad(
    shape: &MlpShape,
    params: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &[bool],
    l2: f64,
) -> (f64, DVector<f64>) {
    let layers = shape.unpack(params);
    let (acts, logits) = forward(&layers, x);
    let n = y.len() as f64;

    let mut loss = logits.iter().zip(y).map(|(&z, &t)| logit_nll(z, t)).sum::<f64>() / n;
    loss += 0.5 * l2 * layers.iter().map(|(w, _)| w.norm_squared()).sum::<f64>();

    // dL/dZ for the output layer, shape n × 1
    let mut delta = DMatrix::from_iterator(
        y.len(),
        1,
        logits.iter().zip(y).map(|(&z, &t)| (sigmoid(z) - if t { 1.0 } else { 0.0 }) / n),
    );
    // gradient blocks share the parameter layout; filled back to front
    let mut flat = vec![0.0; shape.num_params()];
    let mut end = flat.len();
    for l in (0..layers.len()).rev() {
        let (w, _) = &layers[l];
        let a_prev = if l == 0 { x } else { &acts[l - 1] };
        let (fan_in, fan_out) = (w.nrows(), w.ncols());
        let (wblock, bblock) = flat[end - fan_out * fan_in - fan_out..end].split_at_mut(fan_out * fan_in);
        end -= fan_out * fan_in + fan_out;
        let mut gw = a_prev.tr_mul(&delta);
        gw.zip_apply(w, |g, v| *g += l2 * v);
        wblock.copy_from_slice(gw.as_slice());
        for (g, c) in bblock.iter_mut().zip(delta.column_iter()) {
            *g = c.sum();
        }
        if l > 0 {
            let mut da = &delta * w.transpose();
            da.zip_apply(a_prev, |g, a| *g *= 1.0 - a * a);
            delta = da;
        }
    }
    (loss, DVector::from_vec(flat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        assert_eq!(MlpShape::new(64, 100, 1).num_params(), 64 * 100 + 100 + 100 + 1);
        assert_eq!(MlpShape::new(64, 100, 2).num_params(), 64 * 100 + 100 + 100 * 100 + 100 + 101);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let shape = MlpShape::new(3, 4, 2);
        let params = shape.init(9);
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[0.1, -0.4, 0.9, 1.2, 0.3, -0.7, -0.5, 0.8, 0.2, 0.0, -1.1, 0.6, 0.7, 0.7, -0.3],
        );
        let y = vec![true, false, true, false, true];
        let l2 = 0.01;
        let (_, grad) = loss_and_grad(&shape, &params, &x, &y, l2);
        let h = 1e-6;
        for k in 0..shape.num_params() {
            let mut p = params.clone();
            p[k] += h;
            let up = loss_and_grad(&shape, &p, &x, &y, l2).0;
            p[k] -= 2.0 * h;
            let down = loss_and_grad(&shape, &p, &x, &y, l2).0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-7, "param {k}: fd {fd} vs analytic {}", grad[k]);
        }
    }
}
