use super::{gauss_hyp2f1, gauss_legendre_rule, SpecfunError};

const ORDER: usize = 256;

/// Second-order constant `𝓘(α) = ½∫₀¹ g(s)² ds` of the small-log-moneyness
/// expansion, where `g(s) = ∫₀^s (s-u)^α (1-u)^{α+1} du`.
///
/// `g` has the closed form `s^{α+1}/(α+1)·₂F₁(-α-1, 1; α+2; s)`. The outer
/// integral uses the smoothstep substitution `s = w²(3-2w)`, which flattens the
/// algebraic endpoint behaviour at both ends.
pub fn curly_i(alpha: f64) -> Result<f64, SpecfunError> {
    if !(alpha > -0.5 && alpha <= 0.0) {
        return Err(SpecfunError::Alpha(alpha));
    }
    let rule = gauss_legendre_rule(ORDER);
    let q = alpha + 1.0;
    let mut total = 0.0;
    for (&p, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let w = 0.5 * (1.0 + p);
        let s = w * w * (3.0 - 2.0 * w);
        let jac = 6.0 * w * (1.0 - w);
        let g = libm::pow(s, q) / q * gauss_hyp2f1(-q, 1.0, q + 1.0, s)?;
        total += 0.5 * wt * jac * g * g;
    }
    Ok(0.5 * total)
}
