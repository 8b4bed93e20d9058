use alloc::vec;
use alloc::vec::Vec;

use super::RateError;
use crate::model::{Component, KernelParams, Loadings};
use crate::specfun::{KernelMoments, UnitRule};

/// Largest exponent accepted before the forward map reports overflow.
pub(crate) const MAX_EXPONENT: f64 = 700.0;

/// Forward map `f ↦ ∫₀¹ Σ_c γ_c exp(w_c·h(s)) ds` for polynomial controls,
/// with `h_j(s) = √β Σᵢ aʲᵢ cᵢ s^{α+1+i}` precomputed on the quadrature nodes.
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Node-major table of `√β cᵢ s^{α+1+i}`.
    pub phi: Vec<f64>,
    pub width: usize,
    pub drivers: usize,
    pub comps: Vec<Component>,
}

impl Engine {
    pub fn new(kernel: &KernelParams, loadings: &Loadings, degree: usize, rule: &UnitRule) -> Self {
        let width = degree + 1;
        let moments = KernelMoments::new(kernel.alpha, degree);
        let sb = libm::sqrt(kernel.beta());
        let mut phi = Vec::with_capacity(rule.len() * width);
        for &s in &rule.nodes {
            let base = libm::pow(s, kernel.alpha + 1.0);
            let mut sp = 1.0;
            for i in 0..width {
                phi.push(sb * moments.get(i) * base * sp);
                sp *= s;
            }
        }
        Self {
            nodes: rule.nodes.clone(),
            weights: rule.weights.clone(),
            phi,
            width,
            drivers: loadings.drivers,
            comps: loadings.components.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Exponents `w_c·h(s_k)` laid out component-major.
    pub fn exponents(&self, rows: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rows.len(), self.drivers * self.width);
        let n = self.len();
        let mut h = vec![0.0; self.drivers];
        let mut out = vec![0.0; self.comps.len() * n];
        for k in 0..n {
            let phi = &self.phi[k * self.width..(k + 1) * self.width];
            for (j, hj) in h.iter_mut().enumerate() {
                let row = &rows[j * self.width..(j + 1) * self.width];
                *hj = row.iter().zip(phi).map(|(a, p)| a * p).sum();
            }
            for (c, comp) in self.comps.iter().enumerate() {
                out[c * n + k] = comp.loading.iter().zip(&h).map(|(w, x)| w * x).sum();
            }
        }
        out
    }

    fn integrate(&self, exps: &[f64], shift: Option<(&[f64], f64)>) -> Result<f64, RateError> {
        let n = self.len();
        let mut total = 0.0;
        for (c, comp) in self.comps.iter().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                let mut e = exps[c * n + k];
                if let Some((slope, d)) = shift {
                    e += d * slope[c * n + k];
                }
                if e > MAX_EXPONENT {
                    return Err(RateError::Overflow { s: self.nodes[k] });
                }
                acc += self.weights[k] * libm::exp(e);
            }
            total += comp.gamma * acc;
        }
        Ok(total)
    }

    pub fn forward(&self, rows: &[f64]) -> Result<f64, RateError> {
        self.integrate(&self.exponents(rows), None)
    }

    /// Forward map along `rows + δ·(dir ⊗ e_index)` as a function of δ.
    pub fn line(&self, rows: &[f64], dir: &[f64], index: usize) -> Line<'_> {
        let n = self.len();
        let base = self.exponents(rows);
        let mut slope = vec![0.0; base.len()];
        for (c, comp) in self.comps.iter().enumerate() {
            let g: f64 = comp.loading.iter().zip(dir).map(|(w, d)| w * d).sum();
            for k in 0..n {
                slope[c * n + k] = g * self.phi[k * self.width + index];
            }
        }
        Line { engine: self, base, slope }
    }
}

pub(crate) struct Line<'a> {
    engine: &'a Engine,
    base: Vec<f64>,
    slope: Vec<f64>,
}

const NEWTON_STEP: f64 = 1e-6;
const ANCHOR_LIMIT: f64 = 1e3;

impl Line<'_> {
    pub fn eval(&self, delta: f64) -> Result<f64, RateError> {
        self.engine.integrate(&self.base, Some((&self.slope, delta)))
    }

    /// Solves `eval(δ) = target` by Newton with a central-difference derivative,
    /// falling back to bisection on a geometrically grown bracket.
    pub fn solve(&self, target: f64) -> Result<f64, RateError> {
        let tol = 1e-13 * target;
        let mut d = 0.0;
        for _ in 0..60 {
            let f = match self.eval(d) {
                Ok(f) => f,
                Err(_) => break,
            };
            let r = f - target;
            if r.abs() <= tol {
                return Ok(d);
            }
            let (fp, fm) = match (self.eval(d + NEWTON_STEP), self.eval(d - NEWTON_STEP)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => break,
            };
            let deriv = (fp - fm) / (2.0 * NEWTON_STEP);
            if !(deriv > 0.0) {
                break;
            }
            let next = d - r / deriv;
            if !next.is_finite() || next.abs() > ANCHOR_LIMIT {
                break;
            }
            if (next - d).abs() <= 1e-15 * (1.0 + d.abs()) {
                return Ok(next);
            }
            d = next;
        }
        self.bisect(target)
    }

    fn below(&self, d: f64, target: f64) -> Option<bool> {
        match self.eval(d) {
            Ok(f) => Some(f < target),
            Err(RateError::Overflow { .. }) => Some(false),
            Err(_) => None,
        }
    }

    fn bisect(&self, target: f64) -> Result<f64, RateError> {
        let fail = RateError::Bracket { target };
        let mut lo = -1.0;
        let mut hi = 1.0;
        while self.below(lo, target) != Some(true) {
            lo *= 2.0;
            if lo.abs() > ANCHOR_LIMIT {
                return Err(fail);
            }
        }
        while self.below(hi, target) != Some(false) {
            hi *= 2.0;
            if hi > ANCHOR_LIMIT {
                return Err(fail);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.below(mid, target) == Some(true) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
