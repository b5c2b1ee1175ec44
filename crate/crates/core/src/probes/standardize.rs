// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Per-dimension z-scoring fitted on training rows only.
///
/// Zero-variance dimensions are dropped; `kept` lists the retained input
/// columns in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub dropped: Vec<usize>,
}

const MIN_STD: f64 = 1e-10;

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut out = Standardizer { kept: Vec::new(), mean: Vec::new(), std: Vec::new(), dropped: Vec::new() };
        for (j, col) in x.column_iter().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > MIN_STD * mean.abs().max(1.0) {
                out.kept.push(j);
                out.mean.push(mean);
                out.std.push(std);
            } else {
                out.dropped.push(j);
            }
        }
        out
    }

    /// Keeps every column unchanged.
    pub fn identity(dim: usize) -> Self {
        Standardizer { kept: (0..dim).collect(), mean: vec![0.0; dim], std: vec![1.0; dim], dropped: Vec::new() }
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), self.kept.len(), |i, k| (x[(i, self.kept[k])] - self.mean[k]) / self.std[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_columns_are_dropped() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 5.0, 0.1, 2.0, 5.0, 0.2, 3.0, 5.0, 0.3]);
        let s = Standardizer::fit(&x);
        assert_eq!(s.kept, vec![0, 2]);
        assert_eq!(s.dropped, vec![1]);
        assert!(s.std.iter().all(|&v| v > 0.0));
        let z = s.transform(&x);
        assert_eq!(z.ncols(), 2);
        for col in z.column_iter() {
            assert!(col.sum().abs() < 1e-12);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 3.0;
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn held_out_rows_never_influence_statistics() {
        let train = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0]);
        let s = Standardizer::fit(&train);
        let held = DMatrix::from_row_slice(2, 2, &[100.0, -3.0, -7.0, 9.0]);
        let swapped = DMatrix::from_row_slice(2, 2, &[-7.0, 9.0, 100.0, -3.0]);
        let a = s.transform(&held);
        let b = s.transform(&swapped);
        assert_eq!(a.row(0), b.row(1));
        assert_eq!(Standardizer::fit(&train), s);
    }
}
