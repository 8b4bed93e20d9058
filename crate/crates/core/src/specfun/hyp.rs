use alloc::vec::Vec;

use super::{ln_gamma_signed, SpecfunError};

const SERIES_CAP: usize = 200_000;
const SERIES_TOL: f64 = 1e-17;
/// Above this argument the power series is replaced by the `1 - x` connection formula.
const SWITCH_X: f64 = 0.75;

fn is_nonpositive_int(x: f64) -> bool {
    x <= 0.0 && x == libm::floor(x)
}

fn is_int(x: f64) -> bool {
    x == libm::floor(x)
}

/// Power series with term-ratio recursion. Terminates early for polynomial cases.
fn series(a: f64, b: f64, c: f64, x: f64) -> Result<f64, SpecfunError> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..SERIES_CAP {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * x;
        sum += term;
        if term == 0.0 || (term.abs() <= SERIES_TOL * sum.abs() && k > 2) {
            return Ok(sum);
        }
    }
    Err(SpecfunError::NoConvergence(SERIES_CAP))
}

/// Γ(p1)Γ(p2)/(Γ(q1)Γ(q2)), zero when a denominator argument is a pole.
fn gamma_ratio(p1: f64, p2: f64, q1: f64, q2: f64) -> f64 {
    let (lp1, sp1) = ln_gamma_signed(p1);
    let (lp2, sp2) = ln_gamma_signed(p2);
    let (lq1, sq1) = ln_gamma_signed(q1);
    let (lq2, sq2) = ln_gamma_signed(q2);
    if sq1 == 0.0 || sq2 == 0.0 {
        return 0.0;
    }
    sp1 * sp2 * sq1 * sq2 * libm::exp(lp1 + lp2 - lq1 - lq2)
}

/// Gauss hypergeometric function `₂F₁(a, b; c; x)` for `x ∈ [0, 1]`.
///
/// At `x = 1` the Gauss summation theorem is used. For `x` close to 1 with
/// non-integer `c - a - b` the series is continued through the `1 - x`
/// connection formula, which converges geometrically.
pub fn gauss_hyp2f1(a: f64, b: f64, c: f64, x: f64) -> Result<f64, SpecfunError> {
    if is_nonpositive_int(c) {
        return Err(SpecfunError::PoleInC(c));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(SpecfunError::Domain(x));
    }
    let s = c - a - b;
    let terminating = is_nonpositive_int(a) || is_nonpositive_int(b);
    if x == 1.0 {
        if terminating {
            return series(a, b, c, 1.0);
        }
        if s <= 0.0 {
            return Err(SpecfunError::Divergent(s));
        }
        return Ok(gamma_ratio(c, s, c - a, c - b));
    }
    if terminating || x <= SWITCH_X || is_int(s) {
        return series(a, b, c, x);
    }
    let y = 1.0 - x;
    let first = gamma_ratio(c, s, c - a, c - b) * series(a, b, 1.0 - s, y)?;
    let second = gamma_ratio(c, -s, a, b) * libm::pow(y, s) * series(c - a, c - b, s + 1.0, y)?;
    Ok(first + second)
}

/// Kernel moment `c_i(α) = ₂F₁(i+1, -α; i+2; 1)/(i+1)`.
pub fn kernel_moment(i: usize, alpha: f64) -> f64 {
    let a = i as f64 + 1.0;
    // c - a - b = 1 + α > 0 for every admissible α
    gauss_hyp2f1(a, -alpha, a + 1.0, 1.0).expect("Gauss summation converges for α > -1") / a
}

/// Precomputed kernel moments `c_0(α), ..., c_n(α)` for one roughness exponent.
///
/// Built once per model and shared immutably, so parallel callers never touch a cache.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMoments {
    alpha: f64,
    values: Vec<f64>,
}

impl KernelMoments {
    pub fn new(alpha: f64, max_index: usize) -> Self {
        let values = (0..=max_index).map(|i| kernel_moment(i, alpha)).collect();
        Self { alpha, values }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Moment `c_i`, extending past the table with a direct evaluation.
    pub fn get(&self, i: usize) -> f64 {
        match self.values.get(i) {
            Some(v) => *v,
            None => kernel_moment(i, self.alpha),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}
