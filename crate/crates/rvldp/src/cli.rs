//! Command line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use rvldp_core::density::{ab_coeffs, density_report, linear_iv, rv_density, volswap_price};
use rvldp_core::rate::{rate_converge_in, rate_function, rate_sweep, BasisKind, RateOptions, RateResult};
use rvldp_core::smile::SmileOptions;
use rvldp_core::ModelSpec;

use crate::config::ModelConfig;
use crate::mc::{call_estimates, implied_vols, volswap_estimate, GridSpec, VarianceSimulator};
use crate::output::{real, RunManifest, Table};
use crate::smile_par::smile_curves;

pub const STEPS_PER_YEAR: f64 = 1008.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "rvldp", version, about = "Small-time smiles, densities and Monte Carlo prices of realised-variance options")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON model configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; a `.manifest.json` sidecar is written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, required = true)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 200_000)]
    pub paths: usize,
    /// Steps over the longest maturity; defaults to 1008 per year.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Basis {
    Poly,
    Truncated,
}

impl From<Basis> for BasisKind {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Poly => BasisKind::Poly,
            Basis::Truncated => BasisKind::Truncated,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate function values.
    Rate {
        #[command(flatten)]
        common: Common,
        /// Targets in units of v0, as a list or lo:hi:count.
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Fixed degree, or the largest degree when --tol is given.
        #[arg(long, default_value_t = 5)]
        degree: usize,
        #[arg(long, value_enum, default_value_t = Basis::Poly)]
        basis: Basis,
        /// Raise the degree until successive values differ by less than this.
        #[arg(long)]
        tol: Option<f64>,
        /// Emit every degree from 1 with successive differences.
        #[arg(long)]
        sweep: bool,
    },
    /// Small-time implied volatility smile.
    Smile {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        k_grid: String,
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 5)]
        degree: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long)]
        scan: bool,
    },
    /// Realised-variance density under the linear smile.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: String,
        /// Variance levels lo:hi:count; defaults to 201 points across the support.
        #[arg(long)]
        x_grid: Option<String>,
    },
    /// Volatility swap prices from the density and from Monte Carlo.
    Volswap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: String,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Monte Carlo call prices on realised variance.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        k_grid: String,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Asymptotic against Monte Carlo implied volatilities.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: String,
        #[arg(long, allow_hyphen_values = true)]
        k_grid: String,
        #[arg(long, default_value_t = 5)]
        degree: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[command(flatten)]
        mc: McArgs,
    },
}

/// `lo:hi:count` (inclusive, evenly spaced) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse grid '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return match n {
            0 => Err(bad()),
            1 => Ok(vec![lo]),
            _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
        };
    }
    if parts.len() != 1 {
        return Err(bad());
    }
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

fn positive_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let v = parse_grid(s)?;
    if v.iter().any(|x| !(*x > 0.0)) {
        return Err(CliError::Usage(format!("{what} must be positive")));
    }
    Ok(v)
}

fn load(common: &Common) -> Result<ModelSpec, CliError> {
    let cfg = ModelConfig::load(&common.config).map_err(|e| CliError::Usage(e.to_string()))?;
    cfg.to_spec().map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(table: &Table, out: Option<&Path>, manifest: RunManifest) -> Result<(), CliError> {
    match out {
        Some(path) => {
            table.write(path)?;
            manifest.write_beside(path)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write_to(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn smile_options(degree: usize, tol: f64, scan: bool) -> SmileOptions {
    SmileOptions { max_degree: degree, tol, scan, ..SmileOptions::default() }
}

fn bool_str(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

/// Grid over the longest maturity and the step count reaching each maturity.
fn mc_grid(ts: &[f64], steps: Option<usize>) -> Result<(GridSpec, Vec<usize>), CliError> {
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let steps = steps.unwrap_or(((t_max * STEPS_PER_YEAR).round() as usize).max(1));
    let grid = GridSpec::new(t_max, steps).map_err(|e| CliError::Usage(e.to_string()))?;
    let horizons = ts.iter().map(|&t| ((t / grid.dt()).round() as usize).max(1)).collect();
    Ok((grid, horizons))
}

fn run_rate(spec: &ModelSpec, ys: &[f64], degree: usize, basis: BasisKind, tol: Option<f64>, sweep: bool) -> Result<Table, CliError> {
    let opts = RateOptions::default();
    if sweep {
        let mut table = Table::new("rvldp.rate_sweep/1", &["y", "degree", "lambda", "abs_diff", "converged", "residual"]);
        let sweeps: Vec<Result<Vec<RateResult>, _>> =
            ys.par_iter().map(|&y| rate_sweep(y, spec, degree, basis, &opts)).collect();
        for (y, s) in ys.iter().zip(sweeps) {
            let s = s.map_err(numerical)?;
            for (i, r) in s.iter().enumerate() {
                let diff = (i > 0).then(|| (r.value - s[i - 1].value).abs());
                table.push(vec![
                    real(Some(*y)),
                    r.degree.to_string(),
                    real(Some(r.value)),
                    real(diff),
                    bool_str(r.converged),
                    real(Some(r.constraint_residual)),
                ]);
            }
        }
        return Ok(table);
    }
    let results: Vec<Result<RateResult, _>> = ys
        .par_iter()
        .map(|&y| match tol {
            Some(tol) => rate_converge_in(y, spec, basis, tol, degree, &opts),
            None => rate_function(y, spec, degree, basis, &opts),
        })
        .collect();
    let mut table = Table::new("rvldp.rate/1", &["y", "lambda", "degree", "converged", "residual"]);
    for (y, r) in ys.iter().zip(results) {
        let r = r.map_err(numerical)?;
        table.push(vec![
            real(Some(*y)),
            real(Some(r.value)),
            r.degree.to_string(),
            bool_str(r.converged),
            real(Some(r.constraint_residual)),
        ]);
    }
    Ok(table)
}

fn run_smile(spec: &ModelSpec, ks: &[f64], ts: &[f64], opts: &SmileOptions) -> Table {
    let mut table = Table::new("rvldp.smile/1", &["t", "k", "I_k", "iv_limit", "iv_t"]);
    for curve in smile_curves(ks, ts, spec, opts) {
        for p in &curve.points {
            table.push(vec![real(Some(curve.t)), real(Some(p.k)), real(p.i_k), real(p.iv_limit), real(p.iv_t)]);
        }
        let d = curve.diagnostics;
        table.note(
            "diagnostics",
            format!(
                "t={} slope={} intercept={} r2={} quad_coeff={} quad_intercept={}",
                real(Some(curve.t)),
                real(Some(d.slope)),
                real(Some(d.intercept)),
                real(Some(d.r_squared)),
                real(Some(d.quad_coeff)),
                real(Some(d.quad_intercept))
            ),
        );
    }
    table
}

fn run_density(spec: &ModelSpec, ts: &[f64], x_grid: Option<&[f64]>) -> Result<Table, CliError> {
    let p = ab_coeffs(spec).map_err(numerical)?;
    let mut table = Table::new("rvldp.density/1", &["t", "x", "k", "iv", "density"]);
    for &t in ts {
        let report = density_report(t, &p).map_err(numerical)?;
        let xs: Vec<f64> = match x_grid {
            Some(g) => g.to_vec(),
            None => {
                let (lo, hi) = (report.x_lo.ln(), report.x_hi.ln());
                (0..201).map(|i| (lo + (hi - lo) * i as f64 / 200.0).exp()).collect()
            }
        };
        for x in xs {
            let d = rv_density(x, t, &p).ok();
            table.push(vec![
                real(Some(t)),
                real(Some(x)),
                real(Some((x / p.v0).ln())),
                real(Some(linear_iv(x, t, &p))),
                real(d),
            ]);
        }
        let negative: Vec<String> = report.negative.iter().map(|(a, b)| format!("[{}:{}]", real(Some(*a)), real(Some(*b)))).collect();
        table.note(
            "mass",
            format!(
                "t={} mass={} mean={} x_lo={} x_hi={} negative={}",
                real(Some(t)),
                real(Some(report.mass)),
                real(Some(report.mean)),
                real(Some(report.x_lo)),
                real(Some(report.x_hi)),
                if negative.is_empty() { "none".to_string() } else { negative.join(";") }
            ),
        );
    }
    Ok(table)
}

fn run_volswap(spec: &ModelSpec, ts: &[f64], paths: usize, seed: u64, steps: Option<usize>) -> Result<Table, CliError> {
    let p = ab_coeffs(spec).map_err(numerical)?;
    let (grid, horizons) = mc_grid(ts, steps)?;
    let sim = VarianceSimulator::new(spec, grid).map_err(numerical)?;
    let rv = sim.realised_variance(paths, seed, &horizons).map_err(numerical)?;
    let mut table = Table::new("rvldp.volswap/1", &["t", "ldp_price", "mc_price", "mc_stderr", "abs_error_bp"]);
    for (&h, samples) in horizons.iter().zip(&rv) {
        let t = h as f64 * grid.dt();
        let ldp = volswap_price(t, &p).map_err(numerical)?;
        let mc = volswap_estimate(samples, seed);
        table.push(vec![
            real(Some(t)),
            real(Some(ldp)),
            real(Some(mc.mean)),
            real(Some(mc.stderr)),
            real(Some((ldp - mc.mean).abs() * 1e4)),
        ]);
    }
    Ok(table)
}

fn run_mc(spec: &ModelSpec, t: f64, ks: &[f64], paths: usize, seed: u64, steps: Option<usize>) -> Result<Table, CliError> {
    let (grid, horizons) = mc_grid(&[t], steps)?;
    let sim = VarianceSimulator::new(spec, grid).map_err(numerical)?;
    let rv = sim.realised_variance(paths, seed, &horizons).map_err(numerical)?;
    let strikes: Vec<f64> = ks.iter().map(|k| spec.v0 * k.exp()).collect();
    let est = call_estimates(&rv[0], &strikes, seed);
    let ivs = implied_vols(&est, &strikes, spec.v0, grid.t());
    let mut table = Table::new("rvldp.mc/1", &["t", "k", "strike", "price", "stderr", "iv_mc", "iv_stderr"]);
    for ((k, (s, e)), iv) in ks.iter().zip(strikes.iter().zip(&est)).zip(ivs) {
        table.push(vec![
            real(Some(grid.t())),
            real(Some(*k)),
            real(Some(*s)),
            real(Some(e.mean)),
            real(Some(e.stderr)),
            real(iv.map(|v| v.0)),
            real(iv.map(|v| v.1)),
        ]);
    }
    Ok(table)
}

/// Rows of `(t, k, iv_ldp, iv_mc, iv_mc_stderr)` for every maturity and strike.
pub type CompareRow = (f64, f64, Option<f64>, Option<f64>, Option<f64>);

pub fn compare_rows(
    spec: &ModelSpec,
    ts: &[f64],
    ks: &[f64],
    opts: &SmileOptions,
    paths: usize,
    seed: u64,
    steps: Option<usize>,
) -> Result<Vec<CompareRow>, CliError> {
    let (grid, horizons) = mc_grid(ts, steps)?;
    let sim = VarianceSimulator::new(spec, grid).map_err(numerical)?;
    let rv = sim.realised_variance(paths, seed, &horizons).map_err(numerical)?;
    let effective: Vec<f64> = horizons.iter().map(|&h| h as f64 * grid.dt()).collect();
    let curves = smile_curves(ks, &effective, spec, opts);
    let strikes: Vec<f64> = ks.iter().map(|k| spec.v0 * k.exp()).collect();
    let mut rows = Vec::new();
    for ((t, samples), curve) in effective.iter().zip(&rv).zip(&curves) {
        let ivs = implied_vols(&call_estimates(samples, &strikes, seed), &strikes, spec.v0, *t);
        for (p, iv) in curve.points.iter().zip(ivs) {
            rows.push((*t, p.k, p.iv_t, iv.map(|v| v.0), iv.map(|v| v.1)));
        }
    }
    Ok(rows)
}

fn run_compare(rows: &[CompareRow]) -> Table {
    let mut table = Table::new("rvldp.compare/1", &["t", "k", "iv_ldp", "iv_mc", "iv_mc_stderr", "abs_diff"]);
    let mut worst: Vec<(f64, f64)> = Vec::new();
    for &(t, k, ldp, mc, se) in rows {
        let diff = ldp.zip(mc).map(|(a, b)| (a - b).abs());
        match worst.last_mut() {
            Some((wt, w)) if *wt == t => *w = w.max(diff.unwrap_or(0.0)),
            _ => worst.push((t, diff.unwrap_or(0.0))),
        }
        table.push(vec![real(Some(t)), real(Some(k)), real(ldp), real(mc), real(se), real(diff)]);
    }
    for (t, w) in worst {
        table.note("max_abs_diff", format!("t={} value={}", real(Some(t)), real(Some(w))));
    }
    table
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let shown: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, shown) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, args: Vec<String>) -> Result<(), CliError> {
    let start = Instant::now();
    let (name, common, seed, table) = match cli.command {
        Command::Rate { common, y, degree, basis, tol, sweep } => {
            let spec = load(&common)?;
            let ys = positive_list(&y, "y")?;
            if let Some(t) = tol {
                if !(t >= 1e-8) {
                    return Err(CliError::Usage("--tol must be at least 1e-8".into()));
                }
            }
            let table = run_rate(&spec, &ys, degree.max(1), basis.into(), tol, sweep)?;
            ("rate", common, None, table)
        }
        Command::Smile { common, k_grid, t, degree, tol, scan } => {
            let spec = load(&common)?;
            let table = run_smile(&spec, &parse_grid(&k_grid)?, &positive_list(&t, "t")?, &smile_options(degree, tol, scan));
            ("smile", common, None, table)
        }
        Command::Density { common, t, x_grid } => {
            let spec = load(&common)?;
            let xs = x_grid.map(|g| positive_list(&g, "x")).transpose()?;
            let table = run_density(&spec, &positive_list(&t, "t")?, xs.as_deref())?;
            ("density", common, None, table)
        }
        Command::Volswap { common, t, mc } => {
            let spec = load(&common)?;
            let seed = mc.seed.ok_or_else(|| CliError::Usage("--seed is required".into()))?;
            let table = run_volswap(&spec, &positive_list(&t, "t")?, mc.paths, seed, mc.steps)?;
            ("volswap", common, Some(seed), table)
        }
        Command::Mc { common, t, k_grid, mc } => {
            let spec = load(&common)?;
            let seed = mc.seed.ok_or_else(|| CliError::Usage("--seed is required".into()))?;
            if !(t > 0.0) {
                return Err(CliError::Usage("t must be positive".into()));
            }
            let table = run_mc(&spec, t, &parse_grid(&k_grid)?, mc.paths, seed, mc.steps)?;
            ("mc", common, Some(seed), table)
        }
        Command::Compare { common, t, k_grid, degree, tol, mc } => {
            let spec = load(&common)?;
            let seed = mc.seed.ok_or_else(|| CliError::Usage("--seed is required".into()))?;
            let rows = compare_rows(
                &spec,
                &positive_list(&t, "t")?,
                &parse_grid(&k_grid)?,
                &smile_options(degree, tol, false),
                mc.paths,
                seed,
                mc.steps,
            )?;
            ("compare", common, Some(seed), run_compare(&rows))
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        config_path: common.config.display().to_string(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        args,
    };
    emit(&table, common.out.as_deref(), manifest)
}
