//! Small-time implied volatility of realised-variance options.

use alloc::vec::Vec;
use thiserror::Error;

use crate::model::{ModelKind, ModelSpec};
use crate::rate::{rate_converge, RateError, RateOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmileError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("rate value {0:e} too small to invert; k is too close to 0")]
    TooCloseToAtm(f64),
    #[error("rate scan beyond y = {y} found {scan} below the boundary value {boundary}")]
    NonMonotone { y: f64, boundary: f64, scan: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileOptions {
    pub rate: RateOptions,
    /// Degree sweep stops once successive values differ by less than this.
    pub tol: f64,
    pub max_degree: usize,
    /// Also scan beyond the boundary and check that the infimum sits there.
    pub scan: bool,
}

impl Default for SmileOptions {
    fn default() -> Self {
        Self { rate: RateOptions::default(), tol: 1e-7, max_degree: 5, scan: false }
    }
}

const SCAN_POINTS: usize = 21;
const SCAN_TOL: f64 = 1e-4;

fn lambda(y: f64, spec: &ModelSpec, options: &SmileOptions) -> Result<f64, RateError> {
    let tol = options.tol.max(1e-8);
    Ok(rate_converge(y, spec, tol, options.max_degree, &options.rate)?.value)
}

/// `I(k)`, the infimum of `Λ̂(eʸ)` over `y` beyond `k`, taken at the boundary `y = k`.
pub fn rate_i(k: f64, spec: &ModelSpec, options: &SmileOptions) -> Result<f64, SmileError> {
    if k == 0.0 {
        return Ok(0.0);
    }
    let boundary = lambda(libm::exp(k), spec, options)?;
    if !options.scan {
        return Ok(boundary);
    }
    let span = 3.0 * k.abs().max(0.05);
    let mut best = boundary;
    for j in 1..=SCAN_POINTS {
        let kj = k + k.signum() * span * j as f64 / SCAN_POINTS as f64;
        best = best.min(lambda(libm::exp(kj), spec, options)?);
    }
    if best < boundary - SCAN_TOL {
        return Err(SmileError::NonMonotone { y: libm::exp(k), boundary, scan: best });
    }
    Ok(best)
}

/// `|k|/√(2I)`.
pub fn vol_from_rate(k: f64, i_k: f64) -> Result<f64, SmileError> {
    if !(i_k >= 1e-14) {
        return Err(SmileError::TooCloseToAtm(i_k));
    }
    Ok(k.abs() / libm::sqrt(2.0 * i_k))
}

pub fn implied_vol_limit(k: f64, spec: &ModelSpec, options: &SmileOptions) -> Result<f64, SmileError> {
    vol_from_rate(k, rate_i(k, spec, options)?)
}

/// Finite-maturity smile `σ(k)·t^α`.
pub fn implied_vol_t(k: f64, t: f64, spec: &ModelSpec, options: &SmileOptions) -> Result<f64, SmileError> {
    Ok(implied_vol_limit(k, spec, options)? * libm::pow(t, spec.kernel.alpha))
}

/// At-the-money level `√β|Σγw|/((α+1)√(2α+3))·t^α`, where `Σγw` is the mean
/// driver loading (`Σγν` for mixed models).
pub fn atm_level_agm(spec: &ModelSpec, t: f64) -> f64 {
    let alpha = spec.kernel.alpha;
    let d = spec.loadings().mean_loading();
    let m1 = libm::sqrt(d.iter().map(|x| x * x).sum());
    libm::sqrt(spec.beta()) * m1 / ((alpha + 1.0) * libm::sqrt(2.0 * alpha + 3.0)) * libm::pow(t, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmilePoint {
    pub k: f64,
    pub i_k: Option<f64>,
    pub iv_limit: Option<f64>,
    pub iv_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmileDiagnostics {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub quad_coeff: f64,
    /// Constant term of the quadratic fit, the `k → 0` extrapolation.
    pub quad_intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileCurve {
    pub t: f64,
    pub model: ModelKind,
    pub points: Vec<SmilePoint>,
    pub diagnostics: SmileDiagnostics,
}

/// Evaluates one smile point; failures leave the fields empty.
pub fn smile_point(k: f64, t: f64, spec: &ModelSpec, options: &SmileOptions) -> SmilePoint {
    if k == 0.0 {
        return SmilePoint {
            k,
            i_k: Some(0.0),
            iv_limit: Some(atm_level_agm(spec, 1.0)),
            iv_t: Some(atm_level_agm(spec, t)),
        };
    }
    let i_k = rate_i(k, spec, options).ok();
    let iv_limit = i_k.and_then(|i| vol_from_rate(k, i).ok());
    let iv_t = iv_limit.map(|s| s * libm::pow(t, spec.kernel.alpha));
    SmilePoint { k, i_k, iv_limit, iv_t }
}

impl SmileCurve {
    pub fn from_points(t: f64, model: ModelKind, points: Vec<SmilePoint>) -> Self {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| p.iv_t.map(|v| (p.k, v))).unzip();
        let lin = polyfit(&xs, &ys, 1);
        let quad = polyfit(&xs, &ys, 2);
        let diagnostics = SmileDiagnostics {
            slope: lin.coeffs[1],
            intercept: lin.coeffs[0],
            r_squared: lin.r_squared,
            quad_coeff: quad.coeffs[2],
            quad_intercept: quad.coeffs[0],
        };
        Self { t, model, points, diagnostics }
    }
}

/// Smile over `k_grid` at maturity `t`, evaluated point by point in grid order.
pub fn smile_curve(k_grid: &[f64], t: f64, spec: &ModelSpec, options: &SmileOptions) -> SmileCurve {
    let points = k_grid.iter().map(|&k| smile_point(k, t, spec, options)).collect();
    SmileCurve::from_points(t, spec.kind(), points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients in increasing powers.
    pub coeffs: Vec<f64>,
    pub r_squared: f64,
}

/// Least-squares polynomial fit; NaN coefficients when underdetermined.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> PolyFit {
    let n = degree + 1;
    if xs.len() < n {
        return PolyFit { coeffs: alloc::vec![f64::NAN; n], r_squared: f64::NAN };
    }
    // normal equations, solved by Gaussian elimination with partial pivoting
    let mut a = alloc::vec![0.0; n * (n + 1)];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut pw = alloc::vec![1.0; 2 * n];
        for i in 1..2 * n {
            pw[i] = pw[i - 1] * x;
        }
        for i in 0..n {
            for j in 0..n {
                a[i * (n + 1) + j] += pw[i + j];
            }
            a[i * (n + 1) + n] += pw[i] * y;
        }
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * (n + 1) + col].abs().total_cmp(&a[j * (n + 1) + col].abs()))
            .unwrap_or(col);
        for j in 0..=n {
            a.swap(col * (n + 1) + j, piv * (n + 1) + j);
        }
        let p = a[col * (n + 1) + col];
        for i in 0..n {
            if i != col {
                let f = a[i * (n + 1) + col] / p;
                for j in col..=n {
                    a[i * (n + 1) + j] -= f * a[col * (n + 1) + j];
                }
            }
        }
    }
    let coeffs: Vec<f64> = (0..n).map(|i| a[i * (n + 1) + n] / a[i * (n + 1) + i]).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let fit = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean) * (y - mean);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    PolyFit { coeffs, r_squared }
}
