//! Derivative-free simplex minimisation.

use alloc::vec;
use alloc::vec::Vec;

/// Nelder–Mead with restarts from the incumbent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Relative spread of simplex values at which a run stops.
    pub ftol: f64,
    /// Simplex diameter (max-norm) at which a run stops.
    pub xtol: f64,
    pub max_evals: usize,
    pub initial_step: f64,
    pub max_restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { ftol: 1e-8, xtol: 1e-7, max_evals: 10_000, initial_step: 0.1, max_restarts: 6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Counter<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

impl NelderMead {
    /// Minimises `f` from `x0`. NaN values are treated as `+∞`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, f: F, x0: &[f64]) -> Minimum {
        let mut f = Counter { f, evals: 0 };
        let mut best_x = x0.to_vec();
        let mut best = f.call(x0);
        if x0.is_empty() {
            return Minimum { x: best_x, value: best, evaluations: f.evals, converged: true };
        }
        let mut step = self.initial_step;
        for _ in 0..=self.max_restarts {
            let (x, v, ok) = self.run(&mut f, &best_x, best, step);
            let gain = best - v;
            if v <= best {
                best_x = x;
                best = v;
            }
            if !ok {
                return Minimum { x: best_x, value: best, evaluations: f.evals, converged: false };
            }
            if gain <= self.ftol * best.abs() + 1e-300 {
                return Minimum { x: best_x, value: best, evaluations: f.evals, converged: true };
            }
            step = (step * 0.5).max(100.0 * self.xtol);
        }
        Minimum { x: best_x, value: best, evaluations: f.evals, converged: true }
    }

    fn run<F: FnMut(&[f64]) -> f64>(
        &self,
        f: &mut Counter<F>,
        x0: &[f64],
        f0: f64,
        step: f64,
    ) -> (Vec<f64>, f64, bool) {
        let n = x0.len();
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut vals = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        vals.push(f0);
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += step * x0[i].abs().max(1.0);
            vals.push(f.call(&p));
            pts.push(p);
        }
        let mut order: Vec<usize> = (0..=n).collect();
        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];
        loop {
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            let (lo, hi, second) = (order[0], order[n], order[n - 1]);
            let spread = vals[hi] - vals[lo];
            let diam = pts
                .iter()
                .map(|p| p.iter().zip(&pts[lo]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread <= self.ftol * vals[lo].abs() + 1e-300 && diam <= self.xtol {
                return (pts[lo].clone(), vals[lo], true);
            }
            if f.evals >= self.max_evals {
                return (pts[lo].clone(), vals[lo], false);
            }
            centroid.iter_mut().for_each(|c| *c = 0.0);
            for &i in &order[..n] {
                for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                    *c += x / n as f64;
                }
            }
            let along = |t: f64, out: &mut Vec<f64>, worst: &[f64]| {
                for ((o, c), w) in out.iter_mut().zip(&centroid).zip(worst) {
                    *o = c + t * (c - w);
                }
            };
            along(1.0, &mut trial, &pts[hi]);
            let fr = f.call(&trial);
            if fr < vals[lo] {
                along(2.0, &mut trial2, &pts[hi]);
                let fe = f.call(&trial2);
                if fe < fr {
                    pts[hi].copy_from_slice(&trial2);
                    vals[hi] = fe;
                } else {
                    pts[hi].copy_from_slice(&trial);
                    vals[hi] = fr;
                }
                continue;
            }
            if fr < vals[second] {
                pts[hi].copy_from_slice(&trial);
                vals[hi] = fr;
                continue;
            }
            let outside = fr < vals[hi];
            along(if outside { 0.5 } else { -0.5 }, &mut trial2, &pts[hi]);
            let fc = f.call(&trial2);
            if fc < fr.min(vals[hi]) {
                pts[hi].copy_from_slice(&trial2);
                vals[hi] = fc;
                continue;
            }
            let best = pts[lo].clone();
            for &i in &order[1..] {
                for (x, b) in pts[i].iter_mut().zip(&best) {
                    *x = b + 0.5 * (*x - b);
                }
                vals[i] = f.call(&pts[i]);
            }
        }
    }
}
