#![allow(clippy::excessive_precision)]

//! Reference values computed by independent routines in this file and frozen.

use approx::assert_relative_eq;
use rvldp_core::density::ab_coeffs;
use rvldp_core::rate::{
    anchor_closed_form, anchor_newton, forward_map_mixed, forward_map_multi, forward_map_poly,
    forward_map_truncated, l2_norm_sq, singular_constant, BasisCoeffs,
};
use rvldp_core::specfun::{curly_i, gauss_legendre_rule, kernel_moment, KernelMoments};
use rvldp_core::volterra::{build_cholesky, covariance_z};
use rvldp_core::{KernelParams, ModelSpec};

fn simpson_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// `B(i+1, α+1) = i!/((α+1)(α+2)···(α+i+1))`.
fn beta_moment(i: usize, alpha: f64) -> f64 {
    (0..=i).fold(1.0, |acc, j| acc * if j == 0 { 1.0 } else { j as f64 } / (alpha + 1.0 + j as f64))
}

/// `∫₀¹ exp(Σ_c γ_c·w_c·√β·Σᵢ aᵢ cᵢ s^{α+1+i}) ds` by adaptive Simpson.
fn forward_oracle(alpha: f64, a: &[f64], comps: &[(f64, f64)]) -> f64 {
    let sb = (2.0 * alpha + 1.0).sqrt();
    let path = |s: f64| -> f64 {
        a.iter().enumerate().map(|(i, ai)| ai * beta_moment(i, alpha) * s.powf(alpha + 1.0 + i as f64)).sum::<f64>() * sb
    };
    let f = |s: f64| comps.iter().map(|(g, w)| g * (w * path(s)).exp()).sum::<f64>();
    simpson_adaptive(&f, 0.0, 1.0, 1e-14)
}

/// `½∫₀¹ g(s)² ds` with `g` from the Euler integral of the hypergeometric factor.
fn curly_oracle(alpha: f64) -> f64 {
    let q = alpha + 1.0;
    let g = |s: f64| {
        let inner = simpson_adaptive(&|w: f64| (1.0 - s + s * w.powf(1.0 / q)).powf(q), 0.0, 1.0, 1e-13);
        s.powf(q) / q * inner
    };
    0.5 * simpson_adaptive(&|s: f64| g(s) * g(s), 0.0, 1.0, 1e-11)
}

const CURLY_04: f64 = 0.310718956539119;
const CURLY_025: f64 = 0.159556073337665;

#[test]
fn curly_values() {
    assert_relative_eq!(curly_oracle(-0.4), CURLY_04, max_relative = 1e-9);
    assert_relative_eq!(curly_oracle(-0.25), CURLY_025, max_relative = 1e-9);
    assert_relative_eq!(curly_i(-0.4).unwrap(), CURLY_04, max_relative = 1e-12);
    assert_relative_eq!(curly_i(-0.25).unwrap(), CURLY_025, max_relative = 1e-12);
    assert_relative_eq!(curly_i(0.0).unwrap(), 1.0 / 15.0, max_relative = 1e-12);
}

#[test]
fn kernel_moments_match_beta_function() {
    for &alpha in &[-0.45, -0.4, -0.3, -0.1, 0.0] {
        let table = KernelMoments::new(alpha, 12);
        for i in 0..=12 {
            assert_relative_eq!(kernel_moment(i, alpha), beta_moment(i, alpha), max_relative = 1e-12);
            assert_relative_eq!(table.get(i), beta_moment(i, alpha), max_relative = 1e-12);
        }
    }
}

const FORWARD_POLY: f64 = 1.09842339678372936;
const FORWARD_MIXED: f64 = 1.15332192249059462;
const FORWARD_TWO_MIXED: f64 = 1.09984381449020985;

#[test]
fn forward_map_examples() {
    let quad = gauss_legendre_rule(64);
    let k = KernelParams::new(0.0, 1.0).unwrap();
    assert_relative_eq!(forward_map_poly(&BasisCoeffs::Poly(vec![1.0]), &k, &quad).unwrap(), 1f64.exp() - 1.0, epsilon = 1e-13);
    assert_relative_eq!(forward_map_poly(&BasisCoeffs::Poly(vec![0.0; 4]), &k, &quad).unwrap(), 1.0, epsilon = 1e-14);

    let oracle = forward_oracle(-0.4, &[0.1], &[(1.0, 2.0)]);
    assert_relative_eq!(oracle, FORWARD_POLY, epsilon = 1e-12);
    let k = KernelParams::new(-0.4, 2.0).unwrap();
    assert_relative_eq!(forward_map_poly(&BasisCoeffs::Poly(vec![0.1]), &k, &quad).unwrap(), FORWARD_POLY, epsilon = 1e-8);

    let spec = ModelSpec::mixed(-0.4, 2.0, 0.04, vec![0.5, 0.5], vec![1.0, 2.0]).unwrap();
    let oracle = forward_oracle(-0.4, &[0.2], &[(0.5, 1.0), (0.5, 2.0)]);
    assert_relative_eq!(oracle, FORWARD_MIXED, epsilon = 1e-12);
    assert_relative_eq!(forward_map_mixed(&BasisCoeffs::Poly(vec![0.2]), &spec, &quad).unwrap(), FORWARD_MIXED, epsilon = 1e-8);

    let rb = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
    let c = BasisCoeffs::Poly(vec![0.3, -0.2, 0.1]);
    assert_relative_eq!(
        forward_map_mixed(&c, &rb, &quad).unwrap(),
        forward_map_poly(&c, &rb.kernel, &quad).unwrap(),
        epsilon = 1e-15
    );

    // equal constant controls on both drivers; loadings (ν, 0) and (ηρ, η√(1-ρ²)) = (0, 3)
    let spec = ModelSpec::two_factor_mixed(-0.4, 3.0, 0.04, 1.0, 0.0).unwrap();
    let oracle = forward_oracle(-0.4, &[0.1], &[(0.5, 1.0), (0.5, 3.0)]);
    assert_relative_eq!(oracle, FORWARD_TWO_MIXED, epsilon = 1e-12);
    let rows = vec![BasisCoeffs::Poly(vec![0.1]), BasisCoeffs::Poly(vec![0.1])];
    assert_relative_eq!(forward_map_multi(&rows, &spec, &quad).unwrap(), FORWARD_TWO_MIXED, epsilon = 1e-8);
    let zero = vec![BasisCoeffs::Poly(vec![0.0, 0.0]), BasisCoeffs::Poly(vec![0.0])];
    assert_relative_eq!(forward_map_multi(&zero, &spec, &quad).unwrap(), 1.0, epsilon = 1e-14);
    assert!(forward_map_multi(&rows[..1], &spec, &quad).is_err());

    let added = ModelSpec::two_factor_added(-0.4, 1.5, 0.04, 0.7, 1.0).unwrap();
    let rows = vec![BasisCoeffs::Poly(vec![0.2, 0.1]), BasisCoeffs::Poly(vec![0.0])];
    let direct = forward_map_poly(&rows[0], &KernelParams::new(-0.4, 2.2).unwrap(), &quad).unwrap();
    assert_relative_eq!(forward_map_multi(&rows, &added, &quad).unwrap(), direct, max_relative = 1e-14);
}

#[test]
fn forward_map_overflow_is_reported() {
    let quad = gauss_legendre_rule(64);
    let k = KernelParams::new(-0.4, 2.0).unwrap();
    assert!(forward_map_poly(&BasisCoeffs::Poly(vec![1e4]), &k, &quad).is_err());
}

#[test]
fn norms() {
    assert_relative_eq!(l2_norm_sq(&BasisCoeffs::Poly(vec![1.0]), -0.4).unwrap(), 1.0);
    assert_relative_eq!(l2_norm_sq(&BasisCoeffs::Poly(vec![0.0, 1.0]), -0.4).unwrap(), 1.0 / 3.0);
    let (a0, a1) = (0.7, -1.3);
    assert_relative_eq!(
        l2_norm_sq(&BasisCoeffs::Poly(vec![a0, a1]), -0.4).unwrap(),
        a0 * a0 + a0 * a1 + a1 * a1 / 3.0,
        epsilon = 1e-15
    );
    // truncated: ∫_ε¹ (c s^{-α-1} + a₀)² ds by quadrature in log s
    let (alpha, c, eps): (f64, f64, f64) = (-0.3, 0.4, 1e-4);
    let f = |u: f64| {
        let s = u.exp();
        (c * s.powf(-alpha - 1.0) + a0).powi(2) * s
    };
    let direct = simpson_adaptive(&f, eps.ln(), 0.0, 1e-12) + a0 * a0 * eps;
    let t = BasisCoeffs::Truncated { coeffs: vec![a0], c, epsilon: eps };
    assert_relative_eq!(l2_norm_sq(&t, alpha).unwrap(), direct, max_relative = 1e-8);
    assert!(l2_norm_sq(&t, -0.01).is_err());
}

const ANCHOR_A0: f64 = 0.393011487378288393;

#[test]
fn anchoring() {
    let spec = ModelSpec::rough_bergomi(0.0, 1.0, 0.04).unwrap();
    assert_relative_eq!(anchor_newton(1f64.exp() - 1.0, &BasisCoeffs::Poly(vec![0.0]), 0, &spec).unwrap(), 1.0, epsilon = 1e-9);
    let spec = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
    assert_eq!(anchor_newton(1.0, &BasisCoeffs::Poly(vec![0.3, 0.0]), 0, &spec).unwrap(), 0.0);

    // bisection on the adaptive oracle
    let f = |a0: f64| forward_oracle(-0.4, &[a0, 0.1, -0.05], &[(1.0, 2.0)]) - 1.5;
    let (mut lo, mut hi) = (0.0, 2.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    assert_relative_eq!(0.5 * (lo + hi), ANCHOR_A0, epsilon = 1e-12);
    let a = anchor_newton(1.5, &BasisCoeffs::Poly(vec![0.0, 0.1, -0.05]), 0, &spec).unwrap();
    assert_relative_eq!(a, ANCHOR_A0, epsilon = 1e-8);
    assert!(anchor_newton(1.5, &BasisCoeffs::Poly(vec![0.0]), 3, &spec).is_err());
}

#[test]
fn truncated_anchor() {
    let quad = gauss_legendre_rule(64);
    let k = KernelParams::new(-0.3, 1.5).unwrap();
    let zero = BasisCoeffs::Truncated { coeffs: vec![0.0, 0.0], c: 0.0, epsilon: 1e-4 };
    assert_relative_eq!(anchor_closed_form(1.0, &zero, &k, &quad).unwrap(), 0.0, epsilon = 1e-14);

    let a = vec![0.2, -0.1];
    let denom = forward_map_poly(&BasisCoeffs::Poly(a.clone()), &k, &quad).unwrap();
    let t = BasisCoeffs::Truncated { coeffs: a.clone(), c: 0.0, epsilon: 1e-4 };
    let unit = anchor_closed_form(1f64.exp() * denom, &t, &k, &quad).unwrap();
    let expect = 1.0 / (1.5 * 0.4f64.sqrt() * singular_constant(-0.3).unwrap());
    assert_relative_eq!(unit, expect, max_relative = 1e-13);

    // the singular term's path is the constant B(α+1, -α) = π/sin(-πα)
    let constant = std::f64::consts::PI / (0.3 * std::f64::consts::PI).sin();
    assert_relative_eq!(singular_constant(-0.3).unwrap(), constant, max_relative = 1e-13);

    let c = anchor_closed_form(1.3, &t, &k, &quad).unwrap();
    let full = BasisCoeffs::Truncated { coeffs: a, c, epsilon: 1e-4 };
    assert_relative_eq!(forward_map_truncated(&full, &k, &quad).unwrap(), 1.3, epsilon = 1e-8);
}

const COV_HALF_ONE: f64 = 1.03520607759325523;

#[test]
fn covariance_value() {
    // hypergeometric series for ₂F₁(1, -α; α+2; 1/2)
    let (alpha, eta): (f64, f64) = (-0.4, 2.0);
    let (mut term, mut sum) = (1.0, 1.0);
    for n in 0..200 {
        term *= (-alpha + n as f64) / (alpha + 2.0 + n as f64) * 0.5;
        sum += term;
    }
    let oracle = eta * eta * (2.0 * alpha + 1.0) / (alpha + 1.0) * 0.5f64.powf(alpha + 1.0) * sum;
    assert_relative_eq!(oracle, COV_HALF_ONE, epsilon = 1e-13);
    let k = KernelParams::new(alpha, eta).unwrap();
    assert_relative_eq!(covariance_z(0.5, 1.0, &k), COV_HALF_ONE, epsilon = 1e-8);
}

#[test]
fn cholesky_full_grid_needs_no_jitter() {
    let k = KernelParams::new(-0.4, 2.0).unwrap();
    let (_, jitter) = build_cholesky(1.0, 1008, &k).unwrap();
    assert_eq!(jitter, 0.0);
}

const AB_A: f64 = 0.753778361444409017;
const AB_B: f64 = 0.0765476246778376140;

#[test]
fn linear_smile_coefficients() {
    let alpha: f64 = -0.4;
    let (m1, m2) = (0.5 * 1.0 + 0.5 * 2.0, 0.5 * 1.0 + 0.5 * 4.0);
    let (sb, s3) = ((2.0 * alpha + 1.0).sqrt(), (2.0 * alpha + 3.0).sqrt());
    let a = sb * m1 / ((alpha + 1.0) * s3);
    let b = sb * (m2 / m1 * curly_oracle(alpha) * s3.powi(3) * (alpha + 1.0) - m1 / ((2.0 * alpha + 2.0) * s3));
    assert_relative_eq!(a, AB_A, epsilon = 1e-14);
    assert_relative_eq!(b, AB_B, epsilon = 1e-9);
    let p = ab_coeffs(&ModelSpec::mixed(alpha, 2.0, 0.04, vec![0.5, 0.5], vec![1.0, 2.0]).unwrap()).unwrap();
    assert_relative_eq!(p.a, AB_A, epsilon = 1e-10);
    assert_relative_eq!(p.b, AB_B, epsilon = 1e-10);

    let doubled = ab_coeffs(&ModelSpec::mixed(alpha, 2.0, 0.04, vec![0.5, 0.5], vec![2.0, 4.0]).unwrap()).unwrap();
    assert_relative_eq!(doubled.a, 2.0 * p.a, max_relative = 1e-14);
    assert_relative_eq!(doubled.b, 2.0 * p.b, max_relative = 1e-12);

    let near_zero = ab_coeffs(&ModelSpec::rough_bergomi(-1e-9, 1.3, 0.04).unwrap()).unwrap();
    assert_relative_eq!(near_zero.a, 1.3 / 3f64.sqrt(), max_relative = 1e-8);
}
