use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dunkl_core::{make_system, DihedralSystem, Error, PolarPoint, Result, SeriesControl};

#[derive(Debug, Parser)]
#[command(
    name = "dunkl",
    version,
    about = "Radial Dunkl processes on I2(n): kernels, Hermite systems, hitting tails, simulation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Order of the dihedral group I2(n).
    #[arg(long, global = true, default_value_t = 4)]
    pub n: u32,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub k0: f64,
    /// Second multiplicity; even n only.
    #[arg(long, global = true)]
    pub k1: Option<f64>,
    #[arg(long, global = true, env = "DUNKL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long = "max-terms", global = true, default_value_t = 400)]
    pub max_terms: usize,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn system(&self) -> Result<DihedralSystem> {
        let k1 = if self.n.is_multiple_of(2) { Some(self.k1.unwrap_or(self.k0)) } else { self.k1 };
        make_system(self.n, self.k0, k1)
    }

    pub fn control(&self) -> Result<SeriesControl> {
        SeriesControl::new(self.tol, self.max_terms)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition density on an (r, theta) grid.
    Density(DensityArgs),
    /// Generalized Bessel function D(x, y) on a y grid.
    Gbf(GbfArgs),
    /// Hermite system at one point plus the Mehler residual.
    Hermite(HermiteArgs),
    /// Simulated paths, or hitting times with --hitting.
    Simulate(SimulateArgs),
    /// Hitting-time tail P(T0 > t) by series and optionally Monte Carlo.
    Hitting(HittingArgs),
    /// Cross-route validation report as JSON.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub t: f64,
    /// Start point "r,theta".
    #[arg(long, default_value = "1,0.3")]
    pub from: String,
    #[arg(long = "r-max")]
    pub r_max: Option<f64>,
    /// Grid size "nr,ntheta".
    #[arg(long, default_value = "20,10")]
    pub grid: String,
}

#[derive(Debug, Args)]
pub struct GbfArgs {
    /// First argument "r,theta".
    #[arg(long, default_value = "1,0.3")]
    pub x: String,
    #[arg(long = "r-max", default_value_t = 2.0)]
    pub r_max: f64,
    #[arg(long, default_value = "5,4")]
    pub grid: String,
}

#[derive(Debug, Args)]
pub struct HermiteArgs {
    #[arg(long, default_value = "1,0.3")]
    pub at: String,
    /// Largest total degree 2q + 2jh listed.
    #[arg(long = "degree-max", default_value_t = 10)]
    pub degree_max: usize,
    /// Mehler parameter.
    #[arg(long, default_value_t = 0.3)]
    pub r: f64,
    #[arg(long = "mehler-degree", default_value_t = 80)]
    pub mehler_degree: usize,
    /// Second Mehler point "r,theta".
    #[arg(long, default_value = "0.8,0.1")]
    pub with: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "t-max", default_value_t = 1.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 100)]
    pub paths: usize,
    #[arg(long, default_value = "1,0.3")]
    pub from: String,
    #[arg(long = "grid-points", default_value_t = 11)]
    pub grid_points: usize,
    /// Emit first boundary hitting times instead of paths.
    #[arg(long)]
    pub hitting: bool,
}

#[derive(Debug, Args)]
pub struct HittingArgs {
    #[arg(long, default_value = "1,0.3")]
    pub from: String,
    /// Time grid "lo,hi,points".
    #[arg(long = "t-grid", default_value = "0.1,3,30")]
    pub t_grid: String,
    /// Monte Carlo paths; 0 skips the simulation column.
    #[arg(long = "mc-paths", default_value_t = 0)]
    pub mc_paths: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Comma-separated check names; "all" by default, empty for none.
    #[arg(long, default_value = "all")]
    pub checks: String,
    #[arg(long = "mc-paths", default_value_t = 20_000)]
    pub mc_paths: usize,
    #[arg(long = "wedge-paths", default_value_t = 50_000)]
    pub wedge_paths: usize,
}

fn numbers(s: &str, count: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(Error::Config(format!("{what} needs {count} comma-separated numbers, got {s:?}")));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::Config(format!("{what}: cannot parse {s:?}")))
}

pub fn point(s: &str, what: &str) -> Result<PolarPoint> {
    let v = numbers(s, 2, what)?;
    Ok(PolarPoint::new(v[0], v[1]))
}

pub fn grid_sizes(s: &str) -> Result<(usize, usize)> {
    let v = numbers(s, 2, "--grid")?;
    let ok = |x: f64| x >= 1.0 && x.fract() == 0.0 && x <= 10_000.0;
    if !(ok(v[0]) && ok(v[1])) {
        return Err(Error::Config(format!("--grid needs positive integers, got {s:?}")));
    }
    Ok((v[0] as usize, v[1] as usize))
}

pub fn time_grid(s: &str) -> Result<Vec<f64>> {
    let v = numbers(s, 3, "--t-grid")?;
    let (lo, hi, m) = (v[0], v[1], v[2]);
    if !(lo > 0.0 && hi >= lo && m >= 1.0 && m.fract() == 0.0) {
        return Err(Error::Config(format!("--t-grid needs 0 < lo <= hi and a positive count, got {s:?}")));
    }
    let m = m as usize;
    if m == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect())
}
