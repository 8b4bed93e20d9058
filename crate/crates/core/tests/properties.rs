use approx::assert_relative_eq;
use proptest::prelude::*;
use rvldp_core::bs::{bs_call, implied_vol_invert};
use rvldp_core::density::{ab_coeffs, d1_d2, density_report, linear_iv, rv_density, LinearSmileParams};
use rvldp_core::rate::{anchor_newton, forward_map_poly, rate_function, rate_sweep, BasisCoeffs, BasisKind, RateOptions};
use rvldp_core::smile::{implied_vol_t, rate_i, SmileOptions};
use rvldp_core::specfun::{gauss_legendre_rule, std_normal_cdf, std_normal_pdf};
use rvldp_core::volterra::{build_cholesky, covariance_z, Covariance};
use rvldp_core::{KernelParams, ModelSpec};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

#[test]
fn rate_at_one_is_zero() {
    for &alpha in &[-0.4, -0.25] {
        let spec = ModelSpec::rough_bergomi(alpha, 2.0, 0.04).unwrap();
        let r = rate_function(1.0, &spec, 3, BasisKind::Poly, &RateOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.coeffs().coeffs().iter().all(|&a| a == 0.0));
        let spec = ModelSpec::two_factor_mixed(alpha, 3.0, 0.04, 1.0, -0.7).unwrap();
        assert_eq!(rate_function(1.0, &spec, 2, BasisKind::Poly, &RateOptions::default()).unwrap().value, 0.0);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn sweep_is_nonnegative_monotone_and_anchored(
        alpha in -0.45f64..-0.05,
        eta in 0.5f64..2.5,
        y in prop_oneof![0.7f64..0.97, 1.03f64..1.5],
    ) {
        let spec = ModelSpec::rough_bergomi(alpha, eta, 0.04).unwrap();
        let sweep = rate_sweep(y, &spec, 4, BasisKind::Poly, &RateOptions::default()).unwrap();
        let mut prev = f64::INFINITY;
        for r in &sweep {
            prop_assert!(r.value >= 0.0);
            prop_assert!(r.value <= prev + 1e-9, "degree {} rose from {} to {}", r.degree, prev, r.value);
            prop_assert!(r.constraint_residual.abs() <= 1e-8);
            prev = r.value;
        }
    }

    #[test]
    fn two_factor_rates_are_anchored(rho in -0.9f64..0.9, y in prop_oneof![0.8f64..0.95, 1.05f64..1.3]) {
        let spec = ModelSpec::two_factor_mixed(-0.4, 3.0, 0.04, 1.0, rho).unwrap();
        let r = rate_function(y, &spec, 2, BasisKind::Poly, &RateOptions::default()).unwrap();
        prop_assert!(r.value > 0.0);
        prop_assert!(r.constraint_residual.abs() <= 1e-8);
        prop_assert_eq!(r.rows.len(), 2);
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn forward_map_increases_in_every_coefficient(
        alpha in -0.45f64..0.0,
        eta in 0.1f64..3.0,
        a in prop::collection::vec(-1.0f64..1.0, 1..5),
        index in 0usize..4,
    ) {
        let quad = gauss_legendre_rule(64);
        let k = KernelParams::new(alpha, eta).unwrap();
        let i = index % a.len();
        let mut up = a.clone();
        up[i] += 1e-4;
        let lo = forward_map_poly(&BasisCoeffs::Poly(a), &k, &quad).unwrap();
        let hi = forward_map_poly(&BasisCoeffs::Poly(up), &k, &quad).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn diagonal_variance(alpha in -0.49f64..0.0, eta in 0.1f64..3.0, t in 1e-4f64..2.0) {
        let k = KernelParams::new(alpha, eta).unwrap();
        let exact = eta * eta * t.powf(2.0 * alpha + 1.0);
        prop_assert!((covariance_z(t, t, &k) - exact).abs() <= 1e-10 * exact.max(1.0));
    }

    #[test]
    fn covariance_is_symmetric(alpha in -0.49f64..0.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let k = KernelParams::new(alpha, 1.0).unwrap();
        prop_assert_eq!(covariance_z(s, t, &k), covariance_z(t, s, &k));
        prop_assert!(covariance_z(s, t, &k) >= 0.0);
    }

    #[test]
    fn bs_round_trip(sigma in 0.01f64..3.0, k in -0.5f64..0.5, t in 0.01f64..2.0) {
        let (s0, strike) = (0.04, 0.04 * k.exp());
        let price = bs_call(s0, strike, t, sigma);
        // deep in or out of the money the price carries no information about σ
        prop_assume!(price - (s0 - strike).max(0.0) > 1e-12 && s0 - price > 1e-12);
        let iv = implied_vol_invert(price, s0, strike, t).unwrap();
        prop_assert!((iv - sigma).abs() <= 1e-8, "{} vs {}", iv, sigma);
    }
}

fn volswap_params(alpha: f64) -> LinearSmileParams {
    ab_coeffs(&ModelSpec::rough_bergomi(alpha, 1.5, 0.04).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn normal_density_identity(alpha in -0.45f64..-0.05, t in 0.01f64..1.0, k in -1.5f64..1.5) {
        let p = volswap_params(alpha);
        let x = p.v0 * k.exp();
        prop_assume!(linear_iv(x, t, &p) > 0.0);
        let (d1, d2) = d1_d2(x, t, &p).unwrap();
        let lhs = p.v0 * std_normal_pdf(d1);
        let rhs = x * std_normal_pdf(d2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs), "{} vs {}", lhs, rhs);
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn density_is_second_strike_derivative(alpha in -0.45f64..-0.1, t in 0.05f64..1.0, z in -2.5f64..2.5) {
        let p = volswap_params(alpha);
        let total = p.a * t.powf(alpha + 0.5);
        // strike a few standard deviations from the money, where the density is not negligible
        let x = p.v0 * (z * total).exp();
        prop_assume!(linear_iv(x, t, &p) > 0.0);
        // out-of-the-money prices keep the rounding in the second difference small;
        // puts and calls share the strike curvature
        let otm = |k: f64| {
            let sig = linear_iv(k, t, &p);
            if x >= p.v0 {
                bs_call(p.v0, k, t, sig)
            } else {
                let st = sig * t.sqrt();
                let d1 = (p.v0 / k).ln() / st + 0.5 * st;
                k * std_normal_cdf(-(d1 - st)) - p.v0 * std_normal_cdf(-d1)
            }
        };
        let h = 1e-4 * x;
        let fd = (otm(x + h) - 2.0 * otm(x) + otm(x - h)) / (h * h);
        let psi = rv_density(x, t, &p).unwrap();
        prop_assert!((fd - psi).abs() <= 1e-6 * psi.abs().max(1e-3 / p.v0), "{} vs {}", fd, psi);
    }
}

#[test]
fn density_normalises_for_the_volswap_set() {
    for &alpha in &[-0.4, -0.25] {
        let p = volswap_params(alpha);
        for &t in &[1.0 / 12.0, 0.25, 0.5, 1.0] {
            let r = density_report(t, &p).unwrap();
            assert_relative_eq!(r.mass, 1.0, epsilon = 1e-3);
            assert!(r.negative.is_empty(), "alpha {alpha} t {t}: {:?}", r.negative);
        }
    }
}

#[test]
fn cholesky_reconstructs_covariance() {
    let k = KernelParams::new(-0.4, 2.0).unwrap();
    let (n, t) = (200, 0.2);
    let (l, _) = build_cholesky(t, n, &k).unwrap();
    let times: Vec<f64> = (1..=n).map(|i| t * i as f64 / n as f64).collect();
    let c = Covariance::new(k).matrix(&times);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..=j).map(|m| l[i * n + m] * l[j * n + m]).sum();
            worst = worst.max((v - c[i * n + j]).abs());
        }
    }
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn validate_is_idempotent() {
    let specs = [
        ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap(),
        ModelSpec::mixed(-0.4, 2.0, 0.04, vec![0.6, 0.4], vec![1.0, 2.0]).unwrap(),
        ModelSpec::two_factor_added(-0.4, 3.0, 0.04, 1.0, -0.7).unwrap(),
        ModelSpec::two_factor_mixed(-0.25, 3.0, 0.04, 1.0, 0.7).unwrap(),
    ];
    for s in specs {
        assert_eq!(s.clone().validate().unwrap(), s);
        assert_eq!(s.to_multi_factor().validate().unwrap().loadings(), s.loadings());
    }
    assert_eq!(
        ModelSpec::mixed(-0.4, 2.0, 0.04, vec![0.6, 0.5], vec![1.0, 2.0]).unwrap_err().to_string(),
        "weights must sum to 1"
    );
    assert_eq!(
        ModelSpec::mixed(-0.4, 2.0, 0.04, vec![0.5, 0.5], vec![2.0, 1.0]).unwrap_err().to_string(),
        "nu must be strictly increasing"
    );
}

#[test]
fn projected_gradient_vanishes_at_the_minimiser() {
    let spec = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
    for &y in &[0.8, 1.2, 1.5] {
        let r = rate_function(y, &spec, 3, BasisKind::Poly, &RateOptions::default()).unwrap();
        let a = r.coeffs().coeffs().to_vec();
        // objective of the free coefficients with a₀ re-anchored
        let objective = |free: &[f64]| {
            let mut c = vec![0.0];
            c.extend_from_slice(free);
            let a0 = anchor_newton(y, &BasisCoeffs::Poly(c.clone()), 0, &spec).unwrap();
            c[0] = a0;
            let mut norm = 0.0;
            for (i, ci) in c.iter().enumerate() {
                for (j, cj) in c.iter().enumerate() {
                    norm += ci * cj / (i + j + 1) as f64;
                }
            }
            0.5 * norm
        };
        let h = 1e-5;
        let mut grad = 0.0;
        for i in 1..a.len() {
            let (mut up, mut dn) = (a[1..].to_vec(), a[1..].to_vec());
            up[i - 1] += h;
            dn[i - 1] -= h;
            let g = (objective(&up) - objective(&dn)) / (2.0 * h);
            grad += g * g;
        }
        assert!(grad.sqrt() < 1e-4, "y {y}: gradient norm {}", grad.sqrt());
    }
}

#[test]
fn rate_i_is_monotone_in_moneyness() {
    let spec = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
    let opts = SmileOptions::default();
    let right: Vec<f64> = [0.05, 0.1, 0.2, 0.3].iter().map(|&k| rate_i(k, &spec, &opts).unwrap()).collect();
    let left: Vec<f64> = [-0.05, -0.1, -0.2, -0.3].iter().map(|&k| rate_i(k, &spec, &opts).unwrap()).collect();
    assert!(right.windows(2).all(|w| w[0] < w[1]), "{right:?}");
    assert!(left.windows(2).all(|w| w[0] < w[1]), "{left:?}");
    assert!(right[0] > 1e-6 && left[0] > 1e-6);
    assert_eq!(rate_i(0.0, &spec, &opts).unwrap(), 0.0);
}

#[test]
fn boundary_matches_scan() {
    let spec = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
    let plain = SmileOptions::default();
    let scan = SmileOptions { scan: true, ..SmileOptions::default() };
    for &k in &[-0.25, -0.1, 0.1, 0.25] {
        let a = rate_i(k, &spec, &plain).unwrap();
        let b = rate_i(k, &spec, &scan).unwrap();
        assert!((a - b).abs() <= 1e-4, "k {k}: {a} vs {b}");
    }
}

#[test]
fn rate_i_matches_grid_scan() {
    // infimum over y in (e^0.2, e^0.8] on 200 points spaced geometrically away from the boundary
    let spec = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
    let opts = SmileOptions::default();
    let boundary = rate_i(0.2, &spec, &opts).unwrap();
    let mut best = f64::INFINITY;
    for j in 1..=200 {
        let k = 0.2 + 0.6 * 10f64.powf(-5.0 * (200 - j) as f64 / 199.0);
        best = best.min(rate_i(k, &spec, &opts).unwrap());
    }
    assert!((best - boundary).abs() <= 1e-4, "{best} vs {boundary}");
}

#[test]
fn smile_scales_as_power_of_maturity() {
    let spec = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
    let opts = SmileOptions::default();
    let a = implied_vol_t(0.15, 0.1, &spec, &opts).unwrap();
    let b = implied_vol_t(0.15, 0.05, &spec, &opts).unwrap();
    assert_relative_eq!(b / a, 2f64.powf(0.4), max_relative = 1e-14);
    let one = implied_vol_t(0.15, 1.0, &spec, &opts).unwrap();
    assert_eq!(one, rvldp_core::smile::implied_vol_limit(0.15, &spec, &opts).unwrap());
}
