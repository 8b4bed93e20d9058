//! Covariance of the Volterra driver `Z_t = ∫₀ᵗ η√(2α+1)(t-u)^α L(t-u) dW_u`.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::model::KernelParams;
use crate::specfun::{gauss_hyp2f1, gauss_legendre_rule, QuadratureRule};

const ORDER: usize = 128;
pub const MAX_STEPS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CholeskyError {
    #[error("matrix not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("grid of {0} steps exceeds the limit of 4096")]
    TooManySteps(usize),
}

/// Covariance evaluator holding one Gauss–Legendre rule.
#[derive(Debug, Clone)]
pub struct Covariance {
    kernel: KernelParams,
    rule: QuadratureRule,
}

impl Covariance {
    pub fn new(kernel: KernelParams) -> Self {
        Self { kernel, rule: gauss_legendre_rule(ORDER) }
    }

    /// `Cov(Z_s, Z_t)`.
    pub fn at(&self, s: f64, t: f64) -> f64 {
        let KernelParams { alpha, eta, modulation } = self.kernel;
        let (m, big) = if s <= t { (s, t) } else { (t, s) };
        if m <= 0.0 {
            return 0.0;
        }
        let beta = 2.0 * alpha + 1.0;
        let scale = eta * eta * beta;
        if m == big {
            if modulation.is_none() {
                return eta * eta * libm::pow(m, beta);
            }
            // t - u = t·w^{1/β}
            let inner = self.rule.integrate(|p| {
                let w = 0.5 * (1.0 + p);
                let l = modulation.eval(m * libm::pow(w, 1.0 / beta), alpha);
                0.5 * l * l
            });
            return eta * eta * libm::pow(m, beta) * inner;
        }
        if modulation.is_none() {
            // ∫₀ᵐ (m-u)^α(M-u)^α du = m^{α+1}M^α/(α+1)·₂F₁(1, -α; α+2; m/M)
            let f = gauss_hyp2f1(1.0, -alpha, alpha + 2.0, m / big).unwrap_or(f64::NAN);
            return scale / (alpha + 1.0) * libm::pow(m, alpha + 1.0) * libm::pow(big, alpha) * f;
        }
        self.off_diagonal(m, big)
    }

    /// Off-diagonal covariance by quadrature, `m < big`.
    fn off_diagonal(&self, m: f64, big: f64) -> f64 {
        let KernelParams { alpha, eta, modulation } = self.kernel;
        let scale = eta * eta * (2.0 * alpha + 1.0);
        // ∫₀ᵐ rᵅ(g + r)ᵅ dr with g = big - m, split at r = g: the near end takes
        // v = r^{α+1}, the far end a geometric grid in r
        let q = alpha + 1.0;
        let gap = big - m;
        let both = |r: f64| modulation.eval(r, alpha) * modulation.eval(gap + r, alpha);
        let near = gap.min(m);
        let mut total = libm::pow(near, q) / q
            * self.rule.integrate(|p| {
                let r = near * libm::pow(0.5 * (1.0 + p), 1.0 / q);
                0.5 * libm::pow(gap + r, alpha) * both(r)
            });
        if m > gap {
            let span = libm::log(m / gap);
            total += span
                * self.rule.integrate(|p| {
                    let r = gap * libm::exp(0.5 * (1.0 + p) * span);
                    0.5 * libm::pow(r, alpha + 1.0) * libm::pow(gap + r, alpha) * both(r)
                });
        }
        scale * total
    }

    /// Row-major covariance matrix on `times`.
    pub fn matrix(&self, times: &[f64]) -> Vec<f64> {
        let n = times.len();
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.at(times[i], times[j]);
                c[i * n + j] = v;
                c[j * n + i] = v;
            }
        }
        c
    }
}

/// `Cov(Z_s, Z_t)` for a single pair.
pub fn covariance_z(s: f64, t: f64, kernel: &KernelParams) -> f64 {
    Covariance::new(*kernel).at(s, t)
}

/// Lower Cholesky factor (row-major) and the diagonal jitter that was needed.
///
/// On failure the diagonal is loaded with `1e-12·trace/N`, then ten and a
/// hundred and a thousand times that, before giving up.
pub fn cholesky_with_jitter(c: &[f64], n: usize) -> Result<(Vec<f64>, f64), CholeskyError> {
    let trace: f64 = (0..n).map(|i| c[i * n + i]).sum();
    let base = 1e-12 * trace / n as f64;
    let mut jitter = 0.0;
    for attempt in 0..=4 {
        if let Some(l) = cholesky(c, n, jitter) {
            return Ok((l, jitter));
        }
        jitter = base * libm::pow(10.0, attempt as f64);
    }
    Err(CholeskyError::NotPositiveDefinite { jitter })
}

fn cholesky(c: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = l[i * n..i * n + j].iter().zip(&l[j * n..j * n + j]).map(|(a, b)| a * b).sum();
            if i == j {
                let d = c[i * n + i] + jitter - dot;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(d);
            } else {
                l[i * n + j] = (c[i * n + j] - dot) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky factor of the covariance of `(Z_{t₁}, ..., Z_{t_N})` on `t_i = i·T/N`.
pub fn build_cholesky(t: f64, steps: usize, kernel: &KernelParams) -> Result<(Vec<f64>, f64), CholeskyError> {
    if steps > MAX_STEPS {
        return Err(CholeskyError::TooManySteps(steps));
    }
    let times: Vec<f64> = (1..=steps).map(|i| t * i as f64 / steps as f64).collect();
    let c = Covariance::new(*kernel).matrix(&times);
    cholesky_with_jitter(&c, steps)
}
