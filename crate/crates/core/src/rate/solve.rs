use alloc::vec;
use alloc::vec::Vec;

use super::engine::Engine;
use super::{hilbert_form, singular_constant, truncated_norm_sq, BasisCoeffs, BasisKind, RateError, RateResult, TRUNCATED_ALPHA_MAX};
use crate::model::{Loadings, ModelSpec};
use crate::optim::NelderMead;
use crate::specfun::UnitRule;

pub(crate) const DEFAULT_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct RateOptions {
    /// Gauss–Legendre order of the forward-map quadrature.
    pub quad_order: usize,
    pub optimizer: NelderMead,
    /// Truncation point of the singular basis element.
    pub epsilon: f64,
    /// Starting coefficients, one row per driver; shorter rows are zero-padded.
    pub warm_start: Option<Vec<BasisCoeffs>>,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { quad_order: DEFAULT_ORDER, optimizer: NelderMead::default(), epsilon: 1e-4, warm_start: None }
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Unit anchoring direction and an orthonormal basis of its complement.
fn anchor_frame(ld: &Loadings) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = ld.drivers;
    let mut dir = ld.mean_loading();
    let n = norm(&dir);
    if n > 1e-12 {
        dir.iter_mut().for_each(|d| *d /= n);
    } else {
        dir = vec![1.0 / libm::sqrt(m as f64); m];
    }
    let mut basis: Vec<Vec<f64>> = vec![dir.clone()];
    for j in 0..m {
        if basis.len() == m {
            break;
        }
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        for b in &basis {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = norm(&e);
        if n > 1e-8 {
            e.iter_mut().for_each(|x| *x /= n);
            basis.push(e);
        }
    }
    basis.remove(0);
    (dir, basis)
}

struct PolyProblem {
    engine: Engine,
    dir: Vec<f64>,
    perp: Vec<Vec<f64>>,
    target: f64,
}

impl PolyProblem {
    fn width(&self) -> usize {
        self.engine.width
    }

    fn rows_from(&self, x: &[f64]) -> Vec<f64> {
        let (m, w) = (self.engine.drivers, self.width());
        let np = self.perp.len();
        let mut rows = vec![0.0; m * w];
        for j in 0..m {
            rows[j * w] = self.perp.iter().zip(&x[..np]).map(|(e, t)| e[j] * t).sum();
            rows[j * w + 1..(j + 1) * w].copy_from_slice(&x[np + j * (w - 1)..np + (j + 1) * (w - 1)]);
        }
        rows
    }

    fn params_from(&self, rows: &[f64]) -> Vec<f64> {
        let (m, w) = (self.engine.drivers, self.width());
        let mut x: Vec<f64> =
            self.perp.iter().map(|e| (0..m).map(|j| e[j] * rows[j * w]).sum()).collect();
        for j in 0..m {
            x.extend_from_slice(&rows[j * w + 1..(j + 1) * w]);
        }
        x
    }

    /// Anchored rows and objective for the free parameters.
    fn anchored(&self, x: &[f64]) -> Result<(Vec<f64>, f64), RateError> {
        let mut rows = self.rows_from(x);
        let delta = self.engine.line(&rows, &self.dir, 0).solve(self.target)?;
        let w = self.width();
        let mut value = 0.0;
        for (j, d) in self.dir.iter().enumerate() {
            rows[j * w] += delta * d;
            value += 0.5 * hilbert_form(&rows[j * w..(j + 1) * w]);
        }
        Ok((rows, value))
    }
}

fn flatten_start(start: &Option<Vec<BasisCoeffs>>, drivers: usize, width: usize) -> Vec<f64> {
    let mut rows = vec![0.0; drivers * width];
    if let Some(s) = start {
        for (j, r) in s.iter().take(drivers).enumerate() {
            for (i, a) in r.coeffs().iter().take(width).enumerate() {
                rows[j * width + i] = *a;
            }
        }
    }
    rows
}

fn zero_result(y: f64, drivers: usize, degree: usize, basis: BasisKind, epsilon: f64) -> RateResult {
    let row = match basis {
        BasisKind::Poly => BasisCoeffs::Poly(vec![0.0; degree + 1]),
        BasisKind::Truncated => BasisCoeffs::Truncated { coeffs: vec![0.0; degree + 1], c: 0.0, epsilon },
    };
    RateResult { y, value: 0.0, rows: vec![row; drivers], degree, constraint_residual: 0.0, converged: true, evaluations: 0 }
}

/// Minimises `½‖f‖²` over controls of the given degree with the constraint held by anchoring.
pub fn rate_function(
    target_y: f64,
    spec: &ModelSpec,
    degree: usize,
    basis: BasisKind,
    options: &RateOptions,
) -> Result<RateResult, RateError> {
    if !(target_y > 0.0 && target_y.is_finite()) {
        return Err(RateError::Target(target_y));
    }
    let ld = spec.loadings();
    match basis {
        BasisKind::Poly => {
            if target_y == 1.0 {
                return Ok(zero_result(target_y, ld.drivers, degree, basis, options.epsilon));
            }
            rate_poly(target_y, spec, &ld, degree, options)
        }
        BasisKind::Truncated => {
            let alpha = spec.kernel.alpha;
            if !(alpha > -0.5 && alpha <= TRUNCATED_ALPHA_MAX) {
                return Err(RateError::TruncatedAlpha(alpha));
            }
            if ld.components.len() != 1 {
                return Err(RateError::TruncatedModel);
            }
            if target_y == 1.0 {
                return Ok(zero_result(target_y, 1, degree, basis, options.epsilon));
            }
            rate_truncated(target_y, spec, &ld, degree, options)
        }
    }
}

fn rate_poly(
    target: f64,
    spec: &ModelSpec,
    ld: &Loadings,
    degree: usize,
    options: &RateOptions,
) -> Result<RateResult, RateError> {
    let rule = UnitRule::squared(options.quad_order);
    let engine = Engine::new(&spec.kernel, ld, degree, &rule);
    let (dir, perp) = anchor_frame(ld);
    let problem = PolyProblem { engine, dir, perp, target };
    let w = degree + 1;
    let x0 = problem.params_from(&flatten_start(&options.warm_start, ld.drivers, w));
    // the anchor must exist at the starting point
    problem.anchored(&x0)?;
    let min = options
        .optimizer
        .minimize(|x| problem.anchored(x).map(|(_, v)| v).unwrap_or(f64::INFINITY), &x0);
    let (rows, value) = problem.anchored(&min.x)?;
    let residual = problem.engine.forward(&rows)? - target;
    let rows = rows.chunks(w).map(|r| BasisCoeffs::Poly(r.to_vec())).collect();
    Ok(RateResult {
        y: target,
        value,
        rows,
        degree,
        constraint_residual: residual,
        converged: min.converged,
        evaluations: min.evaluations,
    })
}

fn rate_truncated(
    target: f64,
    spec: &ModelSpec,
    ld: &Loadings,
    degree: usize,
    options: &RateOptions,
) -> Result<RateResult, RateError> {
    let rule = UnitRule::squared(options.quad_order);
    // collapse the single component onto one unit driver of loading |w|
    let w = norm(&ld.components[0].loading);
    let single = Loadings {
        drivers: 1,
        components: vec![crate::model::Component { gamma: ld.components[0].gamma, loading: vec![w] }],
    };
    let engine = Engine::new(&spec.kernel, &single, degree, &rule);
    let alpha = spec.kernel.alpha;
    let scale = w * libm::sqrt(spec.kernel.beta()) * singular_constant(alpha)?;
    let eps = options.epsilon;
    let anchored = |a: &[f64]| -> Result<(f64, f64), RateError> {
        let denom = engine.forward(a)?;
        let c = libm::log(target / denom) / scale;
        Ok((c, 0.5 * truncated_norm_sq(a, c, eps, alpha)))
    };
    let x0 = flatten_start(&options.warm_start, 1, degree + 1);
    anchored(&x0)?;
    let min = options.optimizer.minimize(|a| anchored(a).map(|(_, v)| v).unwrap_or(f64::INFINITY), &x0);
    let (c, value) = anchored(&min.x)?;
    let residual = libm::exp(c * scale) * engine.forward(&min.x)? - target;
    Ok(RateResult {
        y: target,
        value,
        rows: vec![BasisCoeffs::Truncated { coeffs: min.x, c, epsilon: eps }],
        degree,
        constraint_residual: residual,
        converged: min.converged,
        evaluations: min.evaluations,
    })
}

/// Rate values for degrees `1..=max_degree`, each warm-started from the previous minimiser.
pub fn rate_sweep(
    target_y: f64,
    spec: &ModelSpec,
    max_degree: usize,
    basis: BasisKind,
    options: &RateOptions,
) -> Result<Vec<RateResult>, RateError> {
    let mut out: Vec<RateResult> = Vec::with_capacity(max_degree);
    let mut opts = options.clone();
    for degree in 1..=max_degree.max(1) {
        let r = rate_function(target_y, spec, degree, basis, &opts)?;
        opts.warm_start = Some(r.rows.clone());
        out.push(r);
    }
    Ok(out)
}

/// Raises the degree from 1 until successive rate values differ by less than `tol`.
///
/// The returned result carries `converged = false` when `max_degree` is reached first.
pub fn rate_converge(
    target_y: f64,
    spec: &ModelSpec,
    tol: f64,
    max_degree: usize,
    options: &RateOptions,
) -> Result<RateResult, RateError> {
    rate_converge_in(target_y, spec, BasisKind::Poly, tol, max_degree, options)
}

/// [`rate_converge`] in either basis.
pub fn rate_converge_in(
    target_y: f64,
    spec: &ModelSpec,
    basis: BasisKind,
    tol: f64,
    max_degree: usize,
    options: &RateOptions,
) -> Result<RateResult, RateError> {
    let mut opts = options.clone();
    let mut prev = rate_function(target_y, spec, 1, basis, &opts)?;
    if target_y == 1.0 {
        return Ok(prev);
    }
    for degree in 2..=max_degree {
        opts.warm_start = Some(prev.rows.clone());
        let next = rate_function(target_y, spec, degree, basis, &opts)?;
        let done = (prev.value - next.value).abs() < tol;
        prev = next;
        if done {
            return Ok(prev);
        }
    }
    prev.converged = false;
    Ok(prev)
}
