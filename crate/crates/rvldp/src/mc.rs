//! Exact-in-law simulation of the variance models on a uniform grid.

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use rvldp_core::bs::implied_vol_invert;
use rvldp_core::volterra::{cholesky_with_jitter, CholeskyError, Covariance, MAX_STEPS};
use rvldp_core::ModelSpec;

/// Largest path batch `paths × steps` that [`simulate_variance`] will hold in memory.
pub const MAX_ENTRIES: usize = 1 << 31;
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("grid needs T > 0 and 1..=4096 steps, got T = {t}, steps = {steps}")]
    Grid { t: f64, steps: usize },
    #[error("{paths} paths of {steps} steps exceed the 2^31 entry limit; simulate in batches")]
    TooLarge { paths: usize, steps: usize },
    #[error("at least one path is required")]
    NoPaths,
    #[error("horizon of {horizon} steps is outside a {steps}-step grid")]
    Horizon { horizon: usize, steps: usize },
    #[error(transparent)]
    Cholesky(#[from] CholeskyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    t: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(t: f64, steps: usize) -> Result<Self, McError> {
        if !(t > 0.0 && t.is_finite()) || steps == 0 || steps > MAX_STEPS {
            return Err(McError::Grid { t, steps });
        }
        Ok(Self { t, steps })
    }

    /// Grid of `round(T/dt)` steps (at least one).
    pub fn from_dt(t: f64, dt: f64) -> Result<Self, McError> {
        Self::new(t, ((t / dt).round() as usize).max(1))
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t / self.steps as f64
    }

    /// `t₁, ..., t_N`, excluding 0.
    pub fn times(&self) -> Vec<f64> {
        (1..=self.steps).map(|i| self.t * i as f64 / self.steps as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
}

impl PriceEstimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I, seed: u64) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let stderr = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { f64::NAN };
        Self { mean, stderr, paths: n, seed }
    }
}

/// Variance paths, one row of `steps + 1` values (starting at `v₀`) per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub steps: usize,
    pub paths: usize,
    pub data: Vec<f64>,
}

impl PathBatch {
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.steps + 1;
        &self.data[i * w..(i + 1) * w]
    }
}

/// Cholesky factor of the unit driver on a grid plus the model's loadings.
///
/// Each path draws its normals from a ChaCha8 stream selected by the path index,
/// all of driver 1 first and then driver 2, so results do not depend on how
/// paths are split across threads.
#[derive(Debug, Clone)]
pub struct VarianceSimulator {
    v0: f64,
    grid: GridSpec,
    factor: DMatrix<f64>,
    /// `Var(Ŵ_{tᵢ})` for the unit driver.
    unit_var: Vec<f64>,
    drivers: usize,
    components: Vec<(f64, Vec<f64>)>,
    jitter: f64,
}

impl VarianceSimulator {
    pub fn new(spec: &ModelSpec, grid: GridSpec) -> Result<Self, McError> {
        let cov = Covariance::new(spec.kernel.unit());
        let times = grid.times();
        let n = times.len();
        let c = cov.matrix(&times);
        let unit_var = (0..n).map(|i| c[i * n + i]).collect();
        let (l, jitter) = cholesky_with_jitter(&c, n)?;
        let ld = spec.loadings();
        Ok(Self {
            v0: spec.v0,
            grid,
            factor: DMatrix::from_row_slice(n, n, &l),
            unit_var,
            drivers: ld.drivers,
            components: ld.components.into_iter().map(|c| (c.gamma, c.loading)).collect(),
            jitter,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Diagonal jitter that the factorisation needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Variance on the grid for paths `first..first + count`, one column per path,
    /// row 0 holding `v₀`.
    fn chunk(&self, first: usize, count: usize, seed: u64) -> DMatrix<f64> {
        let n = self.grid.steps;
        let mut normals: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, count); self.drivers];
        for p in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((first + p) as u64);
            for xi in normals.iter_mut() {
                for i in 0..n {
                    xi[(i, p)] = StandardNormal.sample(&mut rng);
                }
            }
        }
        let drivers: Vec<DMatrix<f64>> = normals.iter().map(|xi| &self.factor * xi).collect();
        let mut v = DMatrix::from_element(n + 1, count, self.v0);
        for p in 0..count {
            for i in 0..n {
                let mut total = 0.0;
                for (gamma, w) in &self.components {
                    let w2: f64 = w.iter().map(|x| x * x).sum();
                    let x: f64 = w.iter().zip(&drivers).map(|(wj, d)| wj * d[(i, p)]).sum();
                    total += gamma * (x - 0.5 * w2 * self.unit_var[i]).exp();
                }
                v[(i + 1, p)] = self.v0 * total;
            }
        }
        v
    }

    fn chunks(paths: usize) -> Vec<(usize, usize)> {
        (0..paths.div_ceil(CHUNK)).map(|c| (c * CHUNK, CHUNK.min(paths - c * CHUNK))).collect()
    }

    /// Trapezoidal realised variance over the first `h` steps of each path, for every horizon.
    ///
    /// Returns one vector of per-path values for each entry of `horizons`.
    pub fn realised_variance(&self, paths: usize, seed: u64, horizons: &[usize]) -> Result<Vec<Vec<f64>>, McError> {
        if paths == 0 {
            return Err(McError::NoPaths);
        }
        let steps = self.grid.steps;
        if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > steps) {
            return Err(McError::Horizon { horizon: h, steps });
        }
        let per_chunk: Vec<Vec<Vec<f64>>> = Self::chunks(paths)
            .into_par_iter()
            .map(|(first, count)| {
                let v = self.chunk(first, count, seed);
                horizons
                    .iter()
                    .map(|&h| {
                        (0..count)
                            .map(|p| {
                                let col = v.column(p);
                                let inner: f64 = (1..h).map(|i| col[i]).sum();
                                (0.5 * (col[0] + col[h]) + inner) / h as f64
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::with_capacity(paths); horizons.len()];
        for chunk in per_chunk {
            for (o, c) in out.iter_mut().zip(chunk) {
                o.extend(c);
            }
        }
        Ok(out)
    }

    /// Mean and standard error of `v_{tᵢ}` at every grid time, `t₀ = 0` included.
    pub fn variance_moments(&self, paths: usize, seed: u64) -> Result<Vec<PriceEstimate>, McError> {
        if paths == 0 {
            return Err(McError::NoPaths);
        }
        let n = self.grid.steps + 1;
        let sums: Vec<(Vec<f64>, Vec<f64>)> = Self::chunks(paths)
            .into_par_iter()
            .map(|(first, count)| {
                let v = self.chunk(first, count, seed);
                let mut s = vec![0.0; n];
                let mut q = vec![0.0; n];
                for p in 0..count {
                    for i in 0..n {
                        let x = v[(i, p)];
                        s[i] += x;
                        q[i] += x * x;
                    }
                }
                (s, q)
            })
            .collect();
        let mut s = vec![0.0; n];
        let mut q = vec![0.0; n];
        for (cs, cq) in sums {
            s.iter_mut().zip(cs).for_each(|(a, b)| *a += b);
            q.iter_mut().zip(cq).for_each(|(a, b)| *a += b);
        }
        let pf = paths as f64;
        Ok((0..n)
            .map(|i| {
                let mean = s[i] / pf;
                let var = ((q[i] - pf * mean * mean) / (pf - 1.0)).max(0.0);
                PriceEstimate { mean, stderr: (var / pf).sqrt(), paths, seed }
            })
            .collect())
    }
}

/// Full variance paths; refuses batches above [`MAX_ENTRIES`].
pub fn simulate_variance(spec: &ModelSpec, grid: GridSpec, paths: usize, seed: u64) -> Result<PathBatch, McError> {
    if paths == 0 {
        return Err(McError::NoPaths);
    }
    if paths.saturating_mul(grid.steps) > MAX_ENTRIES {
        return Err(McError::TooLarge { paths, steps: grid.steps });
    }
    let sim = VarianceSimulator::new(spec, grid)?;
    let chunks: Vec<DMatrix<f64>> = VarianceSimulator::chunks(paths)
        .into_par_iter()
        .map(|(first, count)| sim.chunk(first, count, seed))
        .collect();
    let mut data = Vec::with_capacity(paths * (grid.steps + 1));
    for c in chunks {
        for p in 0..c.ncols() {
            data.extend(c.column(p).iter());
        }
    }
    Ok(PathBatch { steps: grid.steps, paths, data })
}

/// Call prices `E[(RV(T) - K)⁺]` from realised-variance samples.
pub fn call_estimates(rv: &[f64], strikes: &[f64], seed: u64) -> Vec<PriceEstimate> {
    strikes
        .iter()
        .map(|&k| PriceEstimate::from_samples(rv.iter().map(|x| (x - k).max(0.0)), seed))
        .collect()
}

/// `E[√RV(T)]` from realised-variance samples.
pub fn volswap_estimate(rv: &[f64], seed: u64) -> PriceEstimate {
    PriceEstimate::from_samples(rv.iter().map(|x| x.sqrt()), seed)
}

pub fn rv_option_price(
    spec: &ModelSpec,
    grid: GridSpec,
    paths: usize,
    seed: u64,
    strikes: &[f64],
) -> Result<Vec<PriceEstimate>, McError> {
    let rv = VarianceSimulator::new(spec, grid)?.realised_variance(paths, seed, &[grid.steps])?;
    Ok(call_estimates(&rv[0], strikes, seed))
}

pub fn volswap_mc(spec: &ModelSpec, grid: GridSpec, paths: usize, seed: u64) -> Result<PriceEstimate, McError> {
    let rv = VarianceSimulator::new(spec, grid)?.realised_variance(paths, seed, &[grid.steps])?;
    Ok(volswap_estimate(&rv[0], seed))
}

/// Black–Scholes implied volatility of each call estimate on the forward `v₀`, with
/// the first-order standard error `stderr/vega`. Prices outside the no-arbitrage
/// band give `None`.
pub fn implied_vols(estimates: &[PriceEstimate], strikes: &[f64], v0: f64, t: f64) -> Vec<Option<(f64, f64)>> {
    estimates
        .iter()
        .zip(strikes)
        .map(|(e, &k)| {
            let iv = implied_vol_invert(e.mean, v0, k, t).ok()?;
            let vega = rvldp_core::bs::bs_vega(v0, k, t, iv);
            Some((iv, e.stderr / vega))
        })
        .collect()
}
