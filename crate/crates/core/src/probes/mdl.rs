// SPDX-License-Identifier: MIT OR Apache-2.0

//! Online (prequential) codelength of the labels given the features.
//!
//! Instances are put in a seeded random order and cut into blocks at the
//! schedule fractions. The first block is sent with the uniform code
//! (1 bit per label); every later block is sent with the cross-entropy of a
//! probe trained on all preceding blocks.
//!
//! The regularization strength of each block's probe is picked from a fixed
//! grid by two-fold validation on the preceding blocks only, so the code stays
//! a valid prequential code. Below [`MIN_SELECTION_SIZE`] preceding instances
//! the strongest regularization is used.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::cv::layer_features;
use super::{train_probe, ProbeConfig, ProbeError};
use crate::actstore::{ActivationRun, Role};
use crate::seed::substream;

/// Block boundaries as fractions of N, following common online-coding practice.
pub const DEFAULT_FRACTIONS: [f64; 11] = [0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0];

const L2_GRID: [f64; 5] = [1e-2, 1e-1, 1.0, 10.0, 100.0];
pub const MIN_SELECTION_SIZE: usize = 20;
const MIN_BLOCK: usize = 2;

/// `ceil(f·n)` that ignores floating-point dust just above an integer.
fn boundary(fraction: f64, n: usize) -> usize {
    let v = fraction * n as f64;
    if (v - v.round()).abs() < 1e-9 {
        v.round() as usize
    } else {
        v.ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdlSchedule {
    fractions: Vec<f64>,
}

impl MdlSchedule {
    /// Strictly increasing fractions in (0, 1] ending at 1.0.
    pub fn new(fractions: Vec<f64>) -> Result<Self, ProbeError> {
        if fractions.is_empty() {
            return Err(ProbeError::Schedule("empty schedule".into()));
        }
        if fractions.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(ProbeError::Schedule(format!("fractions must be strictly increasing: {fractions:?}")));
        }
        if fractions[0].is_nan() || fractions[0] <= 0.0 || *fractions.last().unwrap() != 1.0 {
            return Err(ProbeError::Schedule(format!("fractions must lie in (0, 1] and end at 1.0: {fractions:?}")));
        }
        Ok(Self { fractions })
    }

    /// The default fractions, clipped for `n` instances so that every block
    /// holds at least two instances.
    pub fn default_for(n: usize) -> Self {
        let mut cuts: Vec<usize> = Vec::new();
        let mut prev = 0;
        for f in DEFAULT_FRACTIONS {
            let b = boundary(f, n);
            if b >= prev + MIN_BLOCK && b + MIN_BLOCK <= n {
                cuts.push(b);
                prev = b;
            }
        }
        cuts.push(n);
        Self { fractions: cuts.into_iter().map(|b| b as f64 / n.max(1) as f64).collect() }
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Block end indices for `n` instances; duplicate boundaries collapse.
    pub fn boundaries(&self, n: usize) -> Result<Vec<usize>, ProbeError> {
        let first = boundary(self.fractions[0], n);
        if first < MIN_BLOCK {
            return Err(ProbeError::Schedule(format!(
                "first fraction {} of {n} instances yields {first} instance(s); need at least {MIN_BLOCK}",
                self.fractions[0]
            )));
        }
        let mut out: Vec<usize> = Vec::with_capacity(self.fractions.len());
        for &f in &self.fractions {
            let b = boundary(f, n).min(n);
            if out.last().is_none_or(|&last| b > last) {
                out.push(b);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdlOptions {
    /// `None` uses the default schedule clipped for the run size.
    pub schedule: Option<Vec<f64>>,
    pub seed: u64,
}

impl MdlOptions {
    pub fn schedule_for(&self, n: usize) -> Result<MdlSchedule, ProbeError> {
        match &self.schedule {
            Some(f) => MdlSchedule::new(f.clone()),
            None => Ok(MdlSchedule::default_for(n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdlBlock {
    pub start: usize,
    pub end: usize,
    pub bits: f64,
    /// Regularization used for this block; `None` for the uniform first block.
    pub l2_strength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdlResult {
    pub codelength_bits: f64,
    /// Uniform codelength (N bits) over the online codelength.
    pub compression: f64,
    pub blocks: Vec<MdlBlock>,
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Nats needed to send `test_y` with a probe trained on the training rows.
/// Single-class training data falls back to a Laplace-smoothed class frequency.
fn block_nats(
    x: &DMatrix<f64>,
    y: &[bool],
    train: &[usize],
    test: &[usize],
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<f64, ProbeError> {
    let train_y: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    let test_y: Vec<bool> = test.iter().map(|&i| y[i]).collect();
    let pos = train_y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == train_y.len() {
        let p = (pos as f64 + 1.0) / (train_y.len() as f64 + 2.0);
        return Ok(test_y.iter().map(|&t| -(if t { p } else { 1.0 - p }).ln()).sum());
    }
    let model = train_probe(&rows(x, train), &train_y, cfg, seed)?;
    Ok(model.nll(&rows(x, test), &test_y))
}

fn select_l2(x: &DMatrix<f64>, y: &[bool], seen: &[usize], cfg: &ProbeConfig, seed: u64) -> Result<f64, ProbeError> {
    let mut grid: Vec<f64> = std::iter::once(cfg.l2()).chain(L2_GRID).collect();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
    grid.dedup();
    if seen.len() < MIN_SELECTION_SIZE {
        return Ok(grid[0]);
    }
    let (a, b) = seen.split_at(seen.len() / 2);
    let mut best = (f64::INFINITY, grid[0]);
    // strongest first, so ties keep the simpler model
    for &l2 in &grid {
        let c = cfg.with_l2(l2);
        let nats = block_nats(x, y, a, b, &c, seed)? + block_nats(x, y, b, a, &c, seed)?;
        if nats < best.0 {
            best = (nats, l2);
        }
    }
    Ok(best.1)
}

/// Online codelength on a feature matrix.
pub fn mdl_codelength_features(
    features: &DMatrix<f64>,
    labels: &[bool],
    cfg: &ProbeConfig,
    schedule: &MdlSchedule,
    seed: u64,
) -> Result<MdlResult, ProbeError> {
    cfg.validate()?;
    let n = labels.len();
    if features.nrows() != n {
        return Err(ProbeError::LengthMismatch { rows: features.nrows(), labels: n });
    }
    let cuts = schedule.boundaries(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, &["mdl-order"]));

    let mut blocks = vec![MdlBlock { start: 0, end: cuts[0], bits: cuts[0] as f64, l2_strength: None }];
    for w in cuts.windows(2) {
        let (seen, block) = (&order[..w[0]], &order[w[0]..w[1]]);
        let l2 = select_l2(features, labels, seen, cfg, seed)?;
        let c = cfg.with_l2(l2);
        let nats = block_nats(features, labels, seen, block, &c, seed)?;
        blocks.push(MdlBlock { start: w[0], end: w[1], bits: nats / std::f64::consts::LN_2, l2_strength: Some(l2) });
    }
    let codelength_bits: f64 = blocks.iter().map(|b| b.bits).sum();
    Ok(MdlResult { codelength_bits, compression: n as f64 / codelength_bits, blocks })
}

/// Online codelength of a run's labels from one (role, layer).
pub fn mdl_codelength(
    run: &ActivationRun,
    role: Role,
    layer: usize,
    cfg: &ProbeConfig,
    schedule: &MdlSchedule,
    seed: u64,
) -> Result<MdlResult, ProbeError> {
    let x = layer_features(run, role, layer)?;
    mdl_codelength_features(&x, &run.manifest.labels(), cfg, schedule, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        assert!(MdlSchedule::new(vec![0.5, 1.0]).is_ok());
        assert!(MdlSchedule::new(vec![0.5, 0.5, 1.0]).is_err());
        assert!(MdlSchedule::new(vec![0.5, 0.9]).is_err());
        assert!(MdlSchedule::new(vec![0.0, 1.0]).is_err());
        assert!(MdlSchedule::new(vec![]).is_err());
    }

    #[test]
    fn default_schedule_blocks_hold_two_or_more() {
        for n in [4, 10, 200, 999, 2000, 5000] {
            let s = MdlSchedule::default_for(n);
            let b = s.boundaries(n).unwrap();
            assert_eq!(*b.last().unwrap(), n);
            let mut prev = 0;
            for &cut in &b {
                assert!(cut - prev >= 2, "n={n} cuts={b:?}");
                prev = cut;
            }
        }
        assert_eq!(MdlSchedule::default_for(2000).boundaries(2000).unwrap()[0], 2);
    }

    #[test]
    fn tiny_first_block_is_an_error() {
        let s = MdlSchedule::new(vec![0.001, 1.0]).unwrap();
        assert!(matches!(s.boundaries(200), Err(ProbeError::Schedule(_))));
    }

    #[test]
    fn boundary_ignores_float_dust() {
        assert_eq!(boundary(0.07, 100), 7);
        assert_eq!(boundary(0.071, 100), 8);
        assert_eq!(boundary(1.0 / 3.0, 3), 1);
    }
}
