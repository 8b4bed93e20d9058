//! JSON model configuration.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use rvldp_core::model::LowerTriangular;
use rvldp_core::{KernelParams, ModelError, ModelSpec, Modulation, Structure};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Missing(&'static str),
    #[error("{0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    RoughBergomi,
    Mixed,
    MultiFactor,
    TwoFactorAdded,
    TwoFactorMixed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Nu {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModulationConfig {
    Gamma { kappa: f64 },
    Power { zeta: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: Kind,
    pub alpha: f64,
    pub eta: f64,
    pub v0: f64,
    #[serde(default)]
    pub gamma: Option<Vec<f64>>,
    #[serde(default)]
    pub nu: Option<Nu>,
    #[serde(default)]
    pub chol: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub kernel_modulation: Option<ModulationConfig>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    fn scalar_nu(&self) -> Result<f64, ConfigError> {
        match &self.nu {
            Some(Nu::Scalar(v)) => Ok(*v),
            Some(Nu::Vector(v)) if v.len() == 1 => Ok(v[0]),
            _ => Err(ConfigError::Missing("two-factor models need a single nu")),
        }
    }

    /// Validated model.
    pub fn to_spec(&self) -> Result<ModelSpec, ConfigError> {
        let mut kernel = KernelParams::new(self.alpha, self.eta)?;
        if let Some(m) = self.kernel_modulation {
            kernel = kernel.with_modulation(match m {
                ModulationConfig::Gamma { kappa } => Modulation::Gamma { kappa },
                ModulationConfig::Power { zeta } => Modulation::Power { zeta },
            })?;
        }
        let rho = || self.rho.ok_or(ConfigError::Missing("two-factor models need rho"));
        let structure = match self.kind {
            Kind::RoughBergomi => Structure::RoughBergomi,
            Kind::Mixed => {
                let gamma = self.gamma.clone().ok_or(ConfigError::Missing("mixed models need gamma"))?;
                let nu = match &self.nu {
                    Some(Nu::Vector(v)) => v.clone(),
                    Some(Nu::Scalar(v)) => vec![*v],
                    _ => return Err(ConfigError::Missing("mixed models need nu as an array")),
                };
                Structure::Mixed { gamma, nu }
            }
            Kind::MultiFactor => {
                let gamma = self.gamma.clone().ok_or(ConfigError::Missing("multi-factor models need gamma"))?;
                let nu = match &self.nu {
                    Some(Nu::Matrix(m)) => m.clone(),
                    _ => return Err(ConfigError::Missing("multi-factor models need nu as an array of arrays")),
                };
                let chol = match &self.chol {
                    Some(ls) => ls.iter().map(|rows| LowerTriangular::from_rows(rows)).collect::<Result<_, _>>()?,
                    None => vec![LowerTriangular::identity(nu.first().map_or(1, Vec::len)); gamma.len()],
                };
                Structure::MultiFactor { gamma, nu, chol }
            }
            Kind::TwoFactorAdded => Structure::TwoFactorAdded { nu: self.scalar_nu()?, rho: rho()? },
            Kind::TwoFactorMixed => Structure::TwoFactorMixed { nu: self.scalar_nu()?, rho: rho()? },
        };
        Ok(ModelSpec { kernel, v0: self.v0, structure }.validate()?)
    }
}
