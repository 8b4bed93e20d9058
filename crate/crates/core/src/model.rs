//! Model parameters and validation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct ModelError(pub String);

fn fail<T>(msg: &str) -> Result<T, ModelError> {
    Err(ModelError(msg.into()))
}

/// Multiplicative modulation `L` of the power-law kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Modulation {
    #[default]
    None,
    /// `L(x) = exp(-κx)`
    Gamma { kappa: f64 },
    /// `L(x) = (1 + x)^{ζ-α}`
    Power { zeta: f64 },
}

impl Modulation {
    pub fn eval(&self, x: f64, alpha: f64) -> f64 {
        match *self {
            Modulation::None => 1.0,
            Modulation::Gamma { kappa } => libm::exp(-kappa * x),
            Modulation::Power { zeta } => libm::pow(1.0 + x, zeta - alpha),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Modulation::None)
    }
}

/// Kernel `η√(2α+1)(t-s)^α·L(t-s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub alpha: f64,
    pub eta: f64,
    pub modulation: Modulation,
}

impl KernelParams {
    pub fn new(alpha: f64, eta: f64) -> Result<Self, ModelError> {
        let k = Self { alpha, eta, modulation: Modulation::None };
        k.check()?;
        Ok(k)
    }

    pub fn with_modulation(mut self, modulation: Modulation) -> Result<Self, ModelError> {
        self.modulation = modulation;
        self.check()?;
        Ok(self)
    }

    /// Same roughness and modulation with unit vol-of-vol.
    pub fn unit(&self) -> Self {
        Self { eta: 1.0, ..*self }
    }

    pub fn beta(&self) -> f64 {
        2.0 * self.alpha + 1.0
    }

    fn check(&self) -> Result<(), ModelError> {
        if !(self.alpha > -0.5 && self.alpha <= 0.0) {
            return fail("alpha must lie in (-1/2, 0]");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return fail("eta must be nonnegative");
        }
        match self.modulation {
            Modulation::Gamma { kappa } if !(kappa > 0.0) => fail("gamma modulation needs kappa > 0"),
            Modulation::Power { zeta } if !(zeta < -1.0) => fail("power modulation needs zeta < -1"),
            _ => Ok(()),
        }
    }
}

/// Dense lower-triangular matrix with a strictly positive diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let dim = rows.len();
        if dim == 0 {
            return fail("chol matrices must be non-empty");
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return fail("chol matrices must be square");
            }
            for (j, &v) in row.iter().enumerate() {
                if j > i && v != 0.0 {
                    return fail("chol matrices must be lower triangular");
                }
                if j == i && !(v > 0.0) {
                    return fail("chol diagonal must be strictly positive");
                }
                if !v.is_finite() {
                    return fail("chol entries must be finite");
                }
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// `Lᵀv`.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|j| (j..self.dim).map(|i| self.get(i, j) * v[i]).sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    RoughBergomi,
    Mixed,
    MultiFactor,
    TwoFactorAdded,
    TwoFactorMixed,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::RoughBergomi => "rough_bergomi",
            ModelKind::Mixed => "mixed",
            ModelKind::MultiFactor => "multi_factor",
            ModelKind::TwoFactorAdded => "two_factor_added",
            ModelKind::TwoFactorMixed => "two_factor_mixed",
        }
    }
}

/// Factor structure of the variance process.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    RoughBergomi,
    Mixed { gamma: Vec<f64>, nu: Vec<f64> },
    MultiFactor { gamma: Vec<f64>, nu: Vec<Vec<f64>>, chol: Vec<LowerTriangular> },
    /// `v = v₀·𝓔(νZ¹ + η(ρZ¹ + √(1-ρ²)Z²))`
    TwoFactorAdded { nu: f64, rho: f64 },
    /// `v = v₀·(𝓔(νZ¹) + 𝓔(η(ρZ¹ + √(1-ρ²)Z²)))/2`
    TwoFactorMixed { nu: f64, rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kernel: KernelParams,
    pub v0: f64,
    pub structure: Structure,
}

/// One Wick exponential `γ·𝓔(w·Ŵ)` over independent unit drivers
/// `Ŵʲ = √β∫(t-s)^α L(t-s) dWʲ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub gamma: f64,
    pub loading: Vec<f64>,
}

/// Model reduced to weighted exponentials of linear combinations of unit drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct Loadings {
    pub drivers: usize,
    pub components: Vec<Component>,
}

impl Loadings {
    /// `Σᵢ γᵢwᵢ`, the first-order sensitivity of the variance to the drivers.
    pub fn mean_loading(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.drivers];
        for c in &self.components {
            for (dj, wj) in d.iter_mut().zip(&c.loading) {
                *dj += c.gamma * wj;
            }
        }
        d
    }
}

fn check_weights(gamma: &[f64]) -> Result<(), ModelError> {
    if gamma.is_empty() {
        return fail("gamma must be non-empty");
    }
    if gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return fail("weights must lie in [0, 1]");
    }
    if (gamma.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return fail("weights must sum to 1");
    }
    Ok(())
}

impl ModelSpec {
    pub fn rough_bergomi(alpha: f64, eta: f64, v0: f64) -> Result<Self, ModelError> {
        Self { kernel: KernelParams::new(alpha, eta)?, v0, structure: Structure::RoughBergomi }.validate()
    }

    pub fn mixed(alpha: f64, eta: f64, v0: f64, gamma: Vec<f64>, nu: Vec<f64>) -> Result<Self, ModelError> {
        Self { kernel: KernelParams::new(alpha, eta)?, v0, structure: Structure::Mixed { gamma, nu } }.validate()
    }

    pub fn two_factor_added(alpha: f64, eta: f64, v0: f64, nu: f64, rho: f64) -> Result<Self, ModelError> {
        let structure = Structure::TwoFactorAdded { nu, rho };
        Self { kernel: KernelParams::new(alpha, eta)?, v0, structure }.validate()
    }

    pub fn two_factor_mixed(alpha: f64, eta: f64, v0: f64, nu: f64, rho: f64) -> Result<Self, ModelError> {
        let structure = Structure::TwoFactorMixed { nu, rho };
        Self { kernel: KernelParams::new(alpha, eta)?, v0, structure }.validate()
    }

    pub fn kind(&self) -> ModelKind {
        match self.structure {
            Structure::RoughBergomi => ModelKind::RoughBergomi,
            Structure::Mixed { .. } => ModelKind::Mixed,
            Structure::MultiFactor { .. } => ModelKind::MultiFactor,
            Structure::TwoFactorAdded { .. } => ModelKind::TwoFactorAdded,
            Structure::TwoFactorMixed { .. } => ModelKind::TwoFactorMixed,
        }
    }

    pub fn beta(&self) -> f64 {
        self.kernel.beta()
    }

    /// Checks every invariant; rough Bergomi is rewritten as a one-factor mixed model.
    pub fn validate(self) -> Result<Self, ModelError> {
        self.kernel.check()?;
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return fail("v0 must be positive");
        }
        let structure = match self.structure {
            Structure::RoughBergomi => Structure::Mixed { gamma: vec![1.0], nu: vec![self.kernel.eta] },
            Structure::Mixed { gamma, nu } => {
                check_weights(&gamma)?;
                if gamma.len() != nu.len() {
                    return fail("gamma and nu must have the same length");
                }
                if !(nu[0] >= 0.0) {
                    return fail("nu must be positive");
                }
                if nu.windows(2).any(|w| !(w[0] < w[1])) {
                    return fail("nu must be strictly increasing");
                }
                Structure::Mixed { gamma, nu }
            }
            Structure::MultiFactor { gamma, nu, chol } => {
                check_weights(&gamma)?;
                if gamma.len() != nu.len() || gamma.len() != chol.len() {
                    return fail("gamma, nu and chol must have the same length");
                }
                let m = chol[0].dim();
                if chol.iter().any(|l| l.dim() != m) || nu.iter().any(|v| v.len() != m) {
                    return fail("nu rows and chol matrices must share one dimension");
                }
                if nu.iter().flatten().any(|v| !v.is_finite()) {
                    return fail("nu entries must be finite");
                }
                Structure::MultiFactor { gamma, nu, chol }
            }
            s @ (Structure::TwoFactorAdded { nu, rho } | Structure::TwoFactorMixed { nu, rho }) => {
                if !(-1.0..=1.0).contains(&rho) {
                    return fail("rho must lie in [-1, 1]");
                }
                if !(nu >= 0.0 && nu.is_finite()) {
                    return fail("nu must be positive");
                }
                s
            }
        };
        Ok(Self { structure, ..self })
    }

    /// General multi-factor representation `(γᵢ, νⁱ, Lᵢ)` with unit drivers scaled by η.
    pub fn to_multi_factor(&self) -> Self {
        let eta = self.kernel.eta;
        let (gamma, nu, chol) = match &self.structure {
            Structure::RoughBergomi => (vec![1.0], vec![vec![eta]], vec![LowerTriangular::identity(1)]),
            Structure::Mixed { gamma, nu } => (
                gamma.clone(),
                nu.iter().map(|&v| vec![v]).collect(),
                vec![LowerTriangular::identity(1); gamma.len()],
            ),
            Structure::MultiFactor { .. } => return self.clone(),
            Structure::TwoFactorAdded { nu, rho } => {
                // Z¹ and ρZ¹ + √(1-ρ²)Z² have covariance [[1, ρ], [ρ, 1]]
                let l = correlation_factor(*rho);
                (vec![1.0], vec![vec![*nu, eta]], vec![l])
            }
            Structure::TwoFactorMixed { nu, rho } => {
                let l = correlation_factor(*rho);
                (vec![0.5, 0.5], vec![vec![*nu, 0.0], vec![0.0, eta]], vec![l.clone(), l])
            }
        };
        Self { structure: Structure::MultiFactor { gamma, nu, chol }, ..self.clone() }
    }

    /// Reduction to components over unit drivers.
    pub fn loadings(&self) -> Loadings {
        let (gamma, nu, chol) = match self.to_multi_factor().structure {
            Structure::MultiFactor { gamma, nu, chol } => (gamma, nu, chol),
            _ => unreachable!(),
        };
        let drivers = chol[0].dim();
        let components = gamma
            .iter()
            .zip(&nu)
            .zip(&chol)
            .map(|((&g, v), l)| Component { gamma: g, loading: l.transpose_mul(v) })
            .collect();
        Loadings { drivers, components }
    }

    /// Weights and vols-of-vol of an equivalent one-driver mixed model, when one exists.
    ///
    /// Exists when all loadings are nonnegative multiples of a single direction.
    pub fn mixed_form(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if let Structure::Mixed { gamma, nu } = &self.structure {
            return Some((gamma.clone(), nu.clone()));
        }
        let ld = self.loadings();
        let norm = |v: &[f64]| libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        let dir = ld.components.iter().map(|c| &c.loading).find(|v| norm(v) > 0.0);
        let mut gamma = Vec::new();
        let mut nu = Vec::new();
        for c in &ld.components {
            let n = norm(&c.loading);
            if let Some(d) = dir {
                let dot: f64 = c.loading.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
                let nd = norm(d);
                if n > 0.0 && (dot - n * nd).abs() > 1e-12 * n * nd {
                    return None;
                }
            }
            gamma.push(c.gamma);
            nu.push(n);
        }
        Some((gamma, nu))
    }
}

fn correlation_factor(rho: f64) -> LowerTriangular {
    let s = libm::sqrt((1.0 - rho * rho).max(0.0));
    // ρ = ±1 leaves a zero diagonal entry, which is legitimate here
    LowerTriangular { dim: 2, data: vec![1.0, 0.0, rho, s] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mixed(gamma: Vec<f64>, nu: Vec<f64>) -> Result<ModelSpec, ModelError> {
        ModelSpec::mixed(-0.4, 2.0, 0.04, gamma, nu)
    }

    #[test]
    fn validation_messages() {
        assert!(mixed(vec![0.6, 0.4], vec![1.0, 2.0]).is_ok());
        assert_eq!(mixed(vec![0.6, 0.5], vec![1.0, 2.0]).unwrap_err().0, "weights must sum to 1");
        assert_eq!(mixed(vec![0.6, 0.4], vec![2.0, 1.0]).unwrap_err().0, "nu must be strictly increasing");
        assert!(KernelParams::new(-0.6, 1.0).is_err());
        assert!(KernelParams::new(-0.3, 1.0).unwrap().with_modulation(Modulation::Power { zeta: -0.5 }).is_err());
        assert!(KernelParams::new(-0.3, 1.0).unwrap().with_modulation(Modulation::Gamma { kappa: 0.0 }).is_err());
        assert!(ModelSpec::two_factor_mixed(-0.4, 3.0, 0.04, 1.0, 1.2).is_err());
    }

    #[test]
    fn beta_values() {
        assert_relative_eq!(KernelParams::new(-0.4, 1.0).unwrap().beta(), 0.2, epsilon = 1e-15);
        assert_eq!(KernelParams::new(-0.25, 1.0).unwrap().beta(), 0.5);
    }

    #[test]
    fn rough_bergomi_normalizes_and_validate_is_idempotent() {
        let s = ModelSpec::rough_bergomi(-0.4, 2.0, 0.04).unwrap();
        assert_eq!(s.structure, Structure::Mixed { gamma: vec![1.0], nu: vec![2.0] });
        assert_eq!(s.clone().validate().unwrap(), s);
    }

    #[test]
    fn two_factor_loadings() {
        let rho: f64 = -0.7;
        let s = ModelSpec::two_factor_mixed(-0.4, 3.0, 0.04, 1.0, rho).unwrap();
        let ld = s.loadings();
        assert_eq!(ld.drivers, 2);
        assert_eq!(ld.components[0].loading, vec![1.0, 0.0]);
        assert_relative_eq!(ld.components[1].loading[0], 3.0 * rho, epsilon = 1e-15);
        assert_relative_eq!(ld.components[1].loading[1], 3.0 * (1.0 - rho * rho).sqrt(), epsilon = 1e-15);
        assert!(s.mixed_form().is_none());

        let a = ModelSpec::two_factor_added(-0.4, 3.0, 0.04, 1.0, 1.0).unwrap();
        assert_eq!(a.mixed_form(), Some((vec![1.0], vec![4.0])));
        let m = ModelSpec::two_factor_mixed(-0.4, 3.0, 0.04, 1.0, 1.0).unwrap();
        assert_eq!(m.mixed_form(), Some((vec![0.5, 0.5], vec![1.0, 3.0])));
    }

    #[test]
    fn lower_triangular_checks() {
        assert!(LowerTriangular::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]).is_err());
        assert!(LowerTriangular::from_rows(&[vec![0.0, 0.0], vec![0.2, 1.0]]).is_err());
        let l = LowerTriangular::from_rows(&[vec![2.0, 0.0], vec![0.5, 1.0]]).unwrap();
        assert_eq!(l.transpose_mul(&[1.0, 2.0]), vec![3.0, 2.0]);
    }
}
