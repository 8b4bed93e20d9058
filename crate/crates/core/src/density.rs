//! Realised-variance density implied by a smile linear in log-moneyness.

use alloc::vec::Vec;
use thiserror::Error;

use crate::model::ModelSpec;
use crate::specfun::{curly_i, std_normal_pdf, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("model has no one-driver mixed form")]
    NotMixed,
    #[error("implied volatility vanishes at x = {0}; the density is undefined there")]
    Clipped(f64),
    #[error("integration tail {tail:e} exceeds tolerance relative to {integral}")]
    Tail { tail: f64, integral: f64 },
    #[error("integration did not settle after {0} intervals")]
    NoConvergence(usize),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Level and slope of `σ̂(K, T) = T^α(a + b·log(K/v₀))⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSmileParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub v0: f64,
}

/// Level and slope of the small-maturity smile of a mixed model.
pub fn ab_coeffs(spec: &ModelSpec) -> Result<LinearSmileParams, DensityError> {
    let (gamma, nu) = spec.mixed_form().ok_or(DensityError::NotMixed)?;
    let alpha = spec.kernel.alpha;
    let m1: f64 = gamma.iter().zip(&nu).map(|(g, v)| g * v).sum();
    let m2: f64 = gamma.iter().zip(&nu).map(|(g, v)| g * v * v).sum();
    let sb = libm::sqrt(2.0 * alpha + 1.0);
    let s3 = libm::sqrt(2.0 * alpha + 3.0);
    let a = sb * m1 / ((alpha + 1.0) * s3);
    let b = if m1 > 0.0 {
        sb * (m2 / m1 * curly_i(alpha)? * s3 * s3 * s3 * (alpha + 1.0) - m1 / ((2.0 * alpha + 2.0) * s3))
    } else {
        0.0
    };
    Ok(LinearSmileParams { a, b, alpha, v0: spec.v0 })
}

/// `max(T^α(a + b·log(K/v₀)), 0)`.
pub fn linear_iv(k: f64, t: f64, p: &LinearSmileParams) -> f64 {
    (libm::pow(t, p.alpha) * (p.a + p.b * libm::log(k / p.v0))).max(0.0)
}

/// Black–Scholes `d₁` and `d₂` at strike `x` with the linear smile.
pub fn d1_d2(x: f64, t: f64, p: &LinearSmileParams) -> Option<(f64, f64)> {
    let sig = linear_iv(x, t, p);
    if !(sig > 0.0) {
        return None;
    }
    let st = sig * libm::sqrt(t);
    let d1 = libm::log(p.v0 / x) / st + 0.5 * st;
    Some((d1, d1 - st))
}

/// Density of the realised variance at level `x`, the second strike derivative
/// of the call prices generated by the linear smile.
pub fn rv_density(x: f64, t: f64, p: &LinearSmileParams) -> Result<f64, DensityError> {
    let sig = linear_iv(x, t, p);
    let (d1, d2) = d1_d2(x, t, p).ok_or(DensityError::Clipped(x))?;
    let ta = libm::pow(t, p.alpha);
    let tah = ta * libm::sqrt(t);
    let dd1 = -p.a * ta / (x * sig * sig * libm::sqrt(t)) + 0.5 * p.b * tah / x;
    Ok(-std_normal_pdf(d2) * dd1 * (p.b * tah * d1 + 1.0))
}

/// Log-moneyness interval on which `σ̂ > 0` and `|d₂| ≤ 10`.
fn support(t: f64, p: &LinearSmileParams) -> (f64, f64) {
    let s0 = p.a * libm::pow(t, p.alpha + 0.5);
    let h = s0 / 64.0;
    let inside = |k: f64| match d1_d2(p.v0 * libm::exp(k), t, p) {
        Some((_, d2)) => d2.abs() <= 10.0,
        None => false,
    };
    let edge = |dir: f64| {
        let mut k = 0.0;
        while inside(k + dir * h) && (k + dir * h).abs() < 50.0 {
            k += dir * h;
        }
        // refine the crossing between k and k + dir·h
        let (mut lo, mut hi) = (k, k + dir * h);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    (edge(-1.0), edge(1.0))
}

fn simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut total = f(lo) + f(hi);
    for i in 1..n {
        total += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + h * i as f64);
    }
    total * h / 3.0
}

const START_INTERVALS: usize = 2048;
const MAX_INTERVALS: usize = 1 << 21;
const REFINE_TOL: f64 = 1e-8;

/// `∫ g(x)ψ(x) dx` over the admissible region, by Simpson's rule in log-moneyness
/// (a geometric grid in `x`), doubling the grid until successive values agree.
pub fn integrate_against<G: Fn(f64) -> f64>(t: f64, p: &LinearSmileParams, g: G) -> Result<f64, DensityError> {
    let (lo, hi) = support(t, p);
    let f = |k: f64| {
        let x = p.v0 * libm::exp(k);
        rv_density(x, t, p).map(|d| d * x * g(x)).unwrap_or(0.0)
    };
    let mut n = START_INTERVALS;
    let mut prev = simpson(&f, lo, hi, n);
    loop {
        n *= 2;
        if n > MAX_INTERVALS {
            return Err(DensityError::NoConvergence(n / 2));
        }
        let next = simpson(&f, lo, hi, n);
        if (next - prev).abs() < REFINE_TOL {
            let s0 = p.a * libm::pow(t, p.alpha + 0.5);
            let tail = (f(lo).abs() + f(hi).abs()) * s0;
            if tail > 1e-8 * next.abs().max(1e-300) {
                return Err(DensityError::Tail { tail, integral: next });
            }
            return Ok(next);
        }
        prev = next;
    }
}

/// `∫√x ψ(x) dx`.
pub fn volswap_price(t: f64, p: &LinearSmileParams) -> Result<f64, DensityError> {
    integrate_against(t, p, libm::sqrt)
}

/// Total mass and the intervals where the density is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub mass: f64,
    pub mean: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub negative: Vec<(f64, f64)>,
}

pub fn density_report(t: f64, p: &LinearSmileParams) -> Result<DensityReport, DensityError> {
    let mass = integrate_against(t, p, |_| 1.0)?;
    let mean = integrate_against(t, p, |x| x)?;
    let (lo, hi) = support(t, p);
    let mut negative = Vec::new();
    let n = 4096;
    let mut open: Option<f64> = None;
    let mut last = lo;
    for i in 0..=n {
        let x = p.v0 * libm::exp(lo + (hi - lo) * i as f64 / n as f64);
        let neg = rv_density(x, t, p).map(|d| d < 0.0).unwrap_or(false);
        match (neg, open) {
            (true, None) => open = Some(x),
            (false, Some(s)) => {
                negative.push((s, last));
                open = None;
            }
            _ => {}
        }
        last = x;
    }
    if let Some(s) = open {
        negative.push((s, last));
    }
    Ok(DensityReport { mass, mean, x_lo: p.v0 * libm::exp(lo), x_hi: p.v0 * libm::exp(hi), negative })
}
