//! Rate function of the normalised realised variance.
//!
//! `Λ̂(y) = inf { ½‖f‖² : y = ∫₀¹ Σ γ_c exp(w_c·(Kf)(s)) ds }`, searched over
//! polynomial controls (optionally with a truncated singular term) whose
//! kernel transforms are available in closed form.

mod engine;
mod solve;

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::model::{KernelParams, Loadings, ModelSpec};
use crate::specfun::{gauss_hyp2f1, QuadratureRule, SpecfunError, UnitRule};
use engine::Engine;

pub use solve::{rate_converge, rate_converge_in, rate_function, rate_sweep, RateOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("exponent overflow at quadrature node s = {s}")]
    Overflow { s: f64 },
    #[error("no anchoring bracket within |a| <= 1e3 for target {target}")]
    Bracket { target: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("truncated basis needs alpha in (-0.5, -0.05], got {0}")]
    TruncatedAlpha(f64),
    #[error("truncated basis needs a one-component single-driver model")]
    TruncatedModel,
    #[error("wrong basis kind for this operation")]
    BasisKind,
    #[error("target must be positive, got {0}")]
    Target(f64),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Poly,
    Truncated,
}

/// Coefficients of a control `f(s) = Σ aᵢ sⁱ`, optionally plus `c·s^{-α-1}·1{s>ε}`.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisCoeffs {
    Poly(Vec<f64>),
    Truncated { coeffs: Vec<f64>, c: f64, epsilon: f64 },
}

impl BasisCoeffs {
    pub fn kind(&self) -> BasisKind {
        match self {
            BasisCoeffs::Poly(_) => BasisKind::Poly,
            BasisCoeffs::Truncated { .. } => BasisKind::Truncated,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        match self {
            BasisCoeffs::Poly(a) => a,
            BasisCoeffs::Truncated { coeffs, .. } => coeffs,
        }
    }

    /// Polynomial degree; an empty coefficient vector counts as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs().len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub y: f64,
    pub value: f64,
    /// One coefficient row per driving Brownian motion.
    pub rows: Vec<BasisCoeffs>,
    pub degree: usize,
    pub constraint_residual: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl RateResult {
    pub fn coeffs(&self) -> &BasisCoeffs {
        &self.rows[0]
    }
}

pub(crate) const TRUNCATED_ALPHA_MAX: f64 = -0.05;

fn padded(a: &[f64], width: usize) -> Vec<f64> {
    let mut v = a.to_vec();
    v.resize(width.max(a.len()), 0.0);
    v
}

fn single_driver(kernel: &KernelParams, gamma: Vec<f64>, nu: Vec<f64>) -> (KernelParams, Loadings) {
    let components = gamma
        .into_iter()
        .zip(nu)
        .map(|(g, v)| crate::model::Component { gamma: g, loading: alloc::vec![v] })
        .collect();
    (*kernel, Loadings { drivers: 1, components })
}

fn poly_coeffs(coeffs: &BasisCoeffs) -> Result<&[f64], RateError> {
    match coeffs {
        BasisCoeffs::Poly(a) => Ok(a),
        _ => Err(RateError::BasisKind),
    }
}

/// `∫₀¹ exp(η√β Σ aᵢ cᵢ s^{α+1+i}) ds` for the plain one-factor model.
///
/// The rule is applied on `[0, 1]` after the substitution `s = w²`.
pub fn forward_map_poly(coeffs: &BasisCoeffs, kernel: &KernelParams, quad: &QuadratureRule) -> Result<f64, RateError> {
    let a = poly_coeffs(coeffs)?;
    let (k, ld) = single_driver(kernel, alloc::vec![1.0], alloc::vec![kernel.eta]);
    let rule = UnitRule::squared(quad.order);
    Engine::new(&k, &ld, coeffs.degree(), &rule).forward(&padded(a, coeffs.degree() + 1))
}

/// Forward map of a mixed model, `∫₀¹ Σ γᵢ exp((νᵢ/η)P(s)) ds`.
pub fn forward_map_mixed(coeffs: &BasisCoeffs, spec: &ModelSpec, quad: &QuadratureRule) -> Result<f64, RateError> {
    let a = poly_coeffs(coeffs)?;
    let (gamma, nu) = spec
        .mixed_form()
        .ok_or_else(|| RateError::Dimension("model has more than one driver".into()))?;
    let (k, ld) = single_driver(&spec.kernel, gamma, nu);
    let rule = UnitRule::squared(quad.order);
    Engine::new(&k, &ld, coeffs.degree(), &rule).forward(&padded(a, coeffs.degree() + 1))
}

/// Forward map of a multi-driver model with one coefficient row per driver.
pub fn forward_map_multi(rows: &[BasisCoeffs], spec: &ModelSpec, quad: &QuadratureRule) -> Result<f64, RateError> {
    let ld = spec.loadings();
    if rows.len() != ld.drivers {
        return Err(RateError::Dimension(alloc::format!("{} rows for {} drivers", rows.len(), ld.drivers)));
    }
    let degree = rows.iter().map(BasisCoeffs::degree).max().unwrap_or(0);
    let mut flat = Vec::with_capacity(rows.len() * (degree + 1));
    for r in rows {
        let mut a = poly_coeffs(r)?.to_vec();
        a.resize(degree + 1, 0.0);
        flat.extend(a);
    }
    let rule = UnitRule::squared(quad.order);
    Engine::new(&spec.kernel, &ld, degree, &rule).forward(&flat)
}

/// Hilbert form `Σᵢⱼ aᵢaⱼ/(i+j+1)`.
pub(crate) fn hilbert_form(a: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (j, aj) in a.iter().enumerate() {
            total += ai * aj / (i + j + 1) as f64;
        }
    }
    total
}

/// `‖f‖²` on `[0, 1]`.
pub fn l2_norm_sq(coeffs: &BasisCoeffs, alpha: f64) -> Result<f64, RateError> {
    match coeffs {
        BasisCoeffs::Poly(a) => Ok(hilbert_form(a)),
        BasisCoeffs::Truncated { coeffs, c, epsilon } => {
            if !(alpha > -0.5 && alpha <= TRUNCATED_ALPHA_MAX) {
                return Err(RateError::TruncatedAlpha(alpha));
            }
            Ok(truncated_norm_sq(coeffs, *c, *epsilon, alpha))
        }
    }
}

pub(crate) fn truncated_norm_sq(a: &[f64], c: f64, eps: f64, alpha: f64) -> f64 {
    let p = -2.0 * alpha - 1.0;
    let mut total = c * c * (1.0 - libm::pow(eps, p)) / p;
    for (i, ai) in a.iter().enumerate() {
        let q = i as f64 - alpha;
        total += 2.0 * c * ai * (1.0 - libm::pow(eps, q)) / q;
    }
    total + hilbert_form(a)
}

/// Value of `∫₀^s (s-u)^α u^{-α-1} du`, independent of `s`.
pub fn singular_constant(alpha: f64) -> Result<f64, RateError> {
    Ok(gauss_hyp2f1(-alpha, -alpha, 1.0 - alpha, 1.0)? / -alpha)
}

/// Re-solves coefficient `anchor_index` so the forward map of a one-driver model equals `target_y`.
pub fn anchor_newton(target_y: f64, coeffs: &BasisCoeffs, anchor_index: usize, spec: &ModelSpec) -> Result<f64, RateError> {
    if !(target_y > 0.0) {
        return Err(RateError::Target(target_y));
    }
    let a = poly_coeffs(coeffs)?;
    if anchor_index >= a.len() {
        return Err(RateError::Dimension(alloc::format!("anchor index {anchor_index} for {} coefficients", a.len())));
    }
    let (gamma, nu) = spec
        .mixed_form()
        .ok_or_else(|| RateError::Dimension("model has more than one driver".into()))?;
    let (k, ld) = single_driver(&spec.kernel, gamma, nu);
    let rule = UnitRule::squared(solve::DEFAULT_ORDER);
    let engine = Engine::new(&k, &ld, coeffs.degree(), &rule);
    let mut rows = a.to_vec();
    rows[anchor_index] = 0.0;
    engine.line(&rows, &[1.0], anchor_index).solve(target_y)
}

/// Closed-form singular coefficient `c*` of the truncated basis for the one-factor model.
pub fn anchor_closed_form(target_y: f64, coeffs: &BasisCoeffs, kernel: &KernelParams, quad: &QuadratureRule) -> Result<f64, RateError> {
    let BasisCoeffs::Truncated { coeffs: a, .. } = coeffs else {
        return Err(RateError::BasisKind);
    };
    let denom = forward_map_poly(&BasisCoeffs::Poly(a.clone()), kernel, quad)?;
    let scale = kernel.eta * libm::sqrt(kernel.beta()) * singular_constant(kernel.alpha)?;
    Ok(libm::log(target_y / denom) / scale)
}

/// Forward map of the truncated basis with the singular term contributing its constant path.
pub fn forward_map_truncated(coeffs: &BasisCoeffs, kernel: &KernelParams, quad: &QuadratureRule) -> Result<f64, RateError> {
    let BasisCoeffs::Truncated { coeffs: a, c, .. } = coeffs else {
        return Err(RateError::BasisKind);
    };
    let poly = forward_map_poly(&BasisCoeffs::Poly(a.clone()), kernel, quad)?;
    let scale = kernel.eta * libm::sqrt(kernel.beta()) * singular_constant(kernel.alpha)?;
    Ok(libm::exp(c * scale) * poly)
}
