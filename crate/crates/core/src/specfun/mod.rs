//! Special functions and quadrature rules.

mod curly;
mod hyp;
mod quadrature;

pub use curly::curly_i;
pub use hyp::{gauss_hyp2f1, kernel_moment, KernelMoments};
pub use quadrature::{gauss_legendre_rule, QuadratureRule, UnitRule};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("hypergeometric series diverges at x = 1 (c - a - b = {0})")]
    Divergent(f64),
    #[error("c = {0} is a non-positive integer")]
    PoleInC(f64),
    #[error("argument x = {0} outside [0, 1]")]
    Domain(f64),
    #[error("series did not converge after {0} terms")]
    NoConvergence(usize),
    #[error("alpha = {0} outside (-1/2, 0)")]
    Alpha(f64),
}

/// Rising factorial `(x)_n`.
pub fn pochhammer(x: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (x + i as f64))
}

/// `ln|Γ(x)|` together with the sign of `Γ(x)`; the sign is 0 at the poles.
pub(crate) fn ln_gamma_signed(x: f64) -> (f64, f64) {
    if x <= 0.0 && x == libm::floor(x) {
        return (f64::INFINITY, 0.0);
    }
    let (v, s) = libm::lgamma_r(x);
    (v, if s < 0 { -1.0 } else { 1.0 })
}

pub fn std_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(7.3, 0), 1.0);
        assert_eq!(pochhammer(3.0, 2), 12.0);
        assert_relative_eq!(pochhammer(0.5, 3), 1.875, epsilon = 1e-15);
    }

    #[test]
    fn normal_basics() {
        assert_relative_eq!(std_normal_pdf(0.0), 1.0 / (2.0 * core::f64::consts::PI).sqrt(), epsilon = 1e-16);
        assert_eq!(std_normal_cdf(0.0), 0.5);
        for &x in &[0.1, 1.0, 2.5, 7.0] {
            assert_relative_eq!(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, epsilon = 1e-15);
        }
        // Phi(-5) to many digits
        assert_relative_eq!(std_normal_cdf(-5.0), 2.866_515_718_791_939e-7, max_relative = 1e-12);
        assert_relative_eq!(std_normal_cdf(1.0), 0.841_344_746_068_542_9, max_relative = 1e-14);
    }

    #[test]
    fn gamma_sign() {
        let (v, s) = ln_gamma_signed(-0.5);
        assert_eq!(s, -1.0);
        assert_relative_eq!(v.exp(), 2.0 * core::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_eq!(ln_gamma_signed(-2.0).1, 0.0);
        assert_relative_eq!(ln_gamma_signed(6.0).0, 120f64.ln(), max_relative = 1e-15);
    }
}
