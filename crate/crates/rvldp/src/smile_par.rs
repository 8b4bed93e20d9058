//! Smiles evaluated strike by strike on the rayon pool.

use rayon::prelude::*;

use rvldp_core::smile::{smile_point, SmileCurve, SmileOptions, SmilePoint};
use rvldp_core::ModelSpec;

/// Rate values and limiting vols for every strike, in grid order.
pub fn limit_points(k_grid: &[f64], spec: &ModelSpec, options: &SmileOptions) -> Vec<SmilePoint> {
    k_grid.par_iter().map(|&k| smile_point(k, 1.0, spec, options)).collect()
}

/// Rescales limit points to maturity `t`.
pub fn at_maturity(points: &[SmilePoint], t: f64, spec: &ModelSpec) -> SmileCurve {
    let scale = t.powf(spec.kernel.alpha);
    let points = points.iter().map(|p| SmilePoint { iv_t: p.iv_limit.map(|v| v * scale), ..*p }).collect();
    SmileCurve::from_points(t, spec.kind(), points)
}

/// One curve per maturity; rates are computed once since they do not depend on `t`.
pub fn smile_curves(k_grid: &[f64], ts: &[f64], spec: &ModelSpec, options: &SmileOptions) -> Vec<SmileCurve> {
    let points = limit_points(k_grid, spec, options);
    ts.iter().map(|&t| at_maturity(&points, t, spec)).collect()
}
