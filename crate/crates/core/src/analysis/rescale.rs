// SPDX-License-Identifier: MIT OR Apache-2.0

//! Relative-depth resampling so curves from models with different layer
//! counts share one `[0, 1]` axis.

use super::AnalysisError;

/// Relative position `i / (L − 1)` of each layer.
pub fn native_positions(num_layers: usize) -> Vec<f64> {
    let last = num_layers.saturating_sub(1).max(1) as f64;
    (0..num_layers).map(|i| i as f64 / last).collect()
}

/// Piecewise-linear value of the curve at relative depth `t ∈ [0, 1]`.
/// Positions within 1e-9 of a knot return the knot value exactly.
pub fn interpolate_at(values: &[f64], t: f64) -> Result<f64, AnalysisError> {
    if values.len() < 2 {
        return Err(AnalysisError::TooShort { needed: 2, actual: values.len() });
    }
    let last = values.len() - 1;
    let pos = t.clamp(0.0, 1.0) * last as f64;
    let knot = pos.round();
    if (pos - knot).abs() < 1e-9 {
        return Ok(values[knot as usize]);
    }
    let k = (pos.floor() as usize).min(last - 1);
    let frac = pos - k as f64;
    Ok(values[k] + frac * (values[k + 1] - values[k]))
}

/// Resamples a per-layer curve onto `grid_points` evenly spaced depths.
pub fn relative_rescale(values: &[f64], grid_points: usize) -> Result<Vec<f64>, AnalysisError> {
    if grid_points < 2 {
        return Err(AnalysisError::TooShort { needed: 2, actual: grid_points });
    }
    let step = (grid_points - 1) as f64;
    (0..grid_points).map(|j| interpolate_at(values, j as f64 / step)).collect()
}
