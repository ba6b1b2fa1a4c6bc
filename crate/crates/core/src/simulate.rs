//! Pathwise construction from two independent squared Bessel processes.
//!
//! Z1^2 has dimension d = 2 m1 + 1 and Z2^2 has dimension d' = 2 m0 + 1, with
//! S = Z1^2 + Z2^2. In the driving clock s the chamber process is
//! R = h S^{1/2h}, theta = (1/h) arccos sqrt(Z1^2 / S), observed at user time
//! tau(s) = int_0^s du / S_u^{(h-1)/h}. The Jacobi clock is F_s = int_0^s du / S_u,
//! and J = Z1^2 / S is a Jacobi process on it.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dihedral::{DihedralSystem, PolarPoint};
use crate::error::{Error, Result};
use crate::specfun::ln_bessel_i_scaled;

fn default_grid_points() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_max: f64,
    /// Step of the user clock; the driving clock step adapts so each step advances time by about `dt`.
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub start: PolarPoint,
    /// Number of points of the uniform output grid on [0, t_max].
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl SimConfig {
    pub fn new(t_max: f64, dt: f64, n_paths: usize, seed: u64, start: PolarPoint) -> Self {
        SimConfig { t_max, dt, n_paths, seed, start, grid_points: default_grid_points() }
    }

    pub fn validate(&self, sys: &DihedralSystem) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.dt > 0.0) || self.dt > self.t_max / 100.0 {
            return Err(Error::Config(format!("dt must lie in (0, t_max/100], got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("grid_points must be at least 2".into()));
        }
        if !(self.start.r > 0.0) || !sys.contains(&self.start) {
            return Err(Error::Config(format!("start {:?} must be a chamber point with r > 0", self.start)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let m = self.grid_points - 1;
        (0..=m).map(|i| self.t_max * i as f64 / m as f64).collect()
    }
}

/// Per-path RNG: the ChaCha stream selects the path, so results do not depend on scheduling.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Clocks at one user time t: the driving time L_t, the additive clock
/// A_t = int_0^t du / |X_u|^2, and the Jacobi clock at L_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSample {
    pub driving: f64,
    pub additive: f64,
    pub jacobi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub radial: Vec<Vec<f64>>,
    pub angular: Vec<Vec<f64>>,
    pub clocks: Vec<Vec<ClockSample>>,
}

impl PathEnsemble {
    /// Radial values of every path at grid index `i`.
    pub fn radial_at(&self, i: usize) -> Vec<f64> {
        self.radial.iter().map(|p| p[i]).collect()
    }

    pub fn angular_at(&self, i: usize) -> Vec<f64> {
        self.angular.iter().map(|p| p[i]).collect()
    }
}

/// Exact transition of a squared Bessel process of dimension >= 1.
#[derive(Debug, Clone, Copy)]
struct Besq {
    dim: f64,
    chi: Option<ChiSquared<f64>>,
}

impl Besq {
    fn new(dim: f64) -> Self {
        let chi = (dim > 1.0).then(|| ChiSquared::new(dim - 1.0).expect("positive degrees of freedom"));
        Besq { dim, chi }
    }

    /// dt * noncentral chi-square(dim, z / dt) = dt [(sqrt(z/dt) + N)^2 + chi^2_{dim-1}].
    fn step<R: Rng + ?Sized>(&self, z: f64, dt: f64, rng: &mut R) -> f64 {
        let n: f64 = rng.sample(StandardNormal);
        let c = (z / dt).sqrt() + n;
        let extra = self.chi.map_or(0.0, |chi| chi.sample(rng));
        dt * (c * c + extra)
    }

    /// Probability that the bridge from x to y over time dt touches 0 (dim < 2 only).
    fn zero_probability(&self, x: f64, y: f64, dt: f64) -> f64 {
        if self.dim >= 2.0 {
            return 0.0;
        }
        if x <= 0.0 || y <= 0.0 {
            return 1.0;
        }
        let w = (x * y).sqrt() / dt;
        if w > 30.0 {
            // 1 - I_mu / I_{-mu} is below 2 e^{-2w}
            return 0.0;
        }
        let mu = 1.0 - 0.5 * self.dim;
        1.0 - (ln_bessel_i_scaled(mu, w) - ln_bessel_i_scaled(-mu, w)).exp()
    }
}

pub fn sample_squared_bessel<R: Rng + ?Sized>(dim: f64, z0: f64, dt: f64, rng: &mut R) -> Result<f64> {
    if !(dim >= 1.0) || !(z0 >= 0.0) || !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "squared Bessel step needs dim >= 1, z0 >= 0, dt > 0; got ({dim}, {z0}, {dt})"
        )));
    }
    Ok(Besq::new(dim).step(z0, dt, rng))
}

fn check_jacobi_inputs(k0: f64, k1: f64, j0: f64, grid: &[f64], dt: f64) -> Result<()> {
    if !(k0 >= 0.0 && k1 >= 0.0) {
        return Err(Error::Config(format!("multiplicities must be >= 0, got ({k0}, {k1})")));
    }
    if !(0.0..=1.0).contains(&j0) {
        return Err(Error::Domain(format!("j0 must lie in [0, 1], got {j0}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("grid must be nonempty, nonnegative and sorted".into()));
    }
    Ok(())
}

/// J on the skew-product construction, evaluated at the Jacobi times `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiSkewPath {
    pub j: Vec<f64>,
    /// Driving time s with F_s = grid[i]; nondecreasing.
    pub driving: Vec<f64>,
}

/// J_{F_s} = Z1^2 / (Z1^2 + Z2^2) with dimensions d = 2k1+1 (Z1) and d' = 2k0+1 (Z2),
/// started from S = 1. The driving step is dt * S so F advances by about dt per step.
pub fn simulate_jacobi_skew<R: Rng + ?Sized>(
    k0: f64,
    k1: f64,
    j0: f64,
    grid: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<JacobiSkewPath> {
    check_jacobi_inputs(k0, k1, j0, grid, dt)?;
    let z1 = Besq::new(2.0 * k1 + 1.0);
    let z2 = Besq::new(2.0 * k0 + 1.0);
    let (mut a, mut b) = (j0, 1.0 - j0);
    let (mut s, mut f) = (0.0, 0.0);
    let mut out = JacobiSkewPath { j: Vec::with_capacity(grid.len()), driving: Vec::with_capacity(grid.len()) };
    let mut g = 0;
    while g < grid.len() && grid[g] <= 0.0 {
        out.j.push(j0);
        out.driving.push(0.0);
        g += 1;
    }
    while g < grid.len() {
        let sum = a + b;
        let ds = dt * sum;
        let (a1, b1) = (z1.step(a, ds, rng), z2.step(b, ds, rng));
        let sum1 = a1 + b1;
        if !(sum1 > 0.0) {
            return Err(Error::Degenerate("Z1^2 + Z2^2 reached zero".into()));
        }
        let df = 0.5 * ds * (1.0 / sum + 1.0 / sum1);
        let (j_old, j_new) = (a / sum, a1 / sum1);
        while g < grid.len() && grid[g] <= f + df {
            let lam = (grid[g] - f) / df;
            out.j.push((j_old + lam * (j_new - j_old)).clamp(0.0, 1.0));
            out.driving.push(s + lam * ds);
            g += 1;
        }
        a = a1;
        b = b1;
        s += ds;
        f += df;
    }
    Ok(out)
}

/// Euler scheme for dJ = 2 sqrt(J(1-J)) dB + (d - (d+d')J) dt, clamped to [0, 1] after each step.
/// Steps are shortened so that every grid time is hit exactly.
pub fn simulate_jacobi_euler<R: Rng + ?Sized>(
    k0: f64,
    k1: f64,
    j0: f64,
    grid: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_jacobi_inputs(k0, k1, j0, grid, dt)?;
    let d = 2.0 * k1 + 1.0;
    let dd = d + 2.0 * k0 + 1.0;
    let mut j = j0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &target in grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt).ceil() as usize;
            let h = span / steps as f64;
            let sh = h.sqrt();
            for _ in 0..steps {
                let n: f64 = rng.sample(StandardNormal);
                j += (d - dd * j) * h + 2.0 * (j * (1.0 - j)).sqrt() * sh * n;
                j = j.clamp(0.0, 1.0);
            }
            t = target;
        }
        out.push(j);
    }
    Ok(out)
}

/// Fixed point of the Euler drift, d / (d + d').
pub fn jacobi_drift_fixed_point(k0: f64, k1: f64) -> f64 {
    let d = 2.0 * k1 + 1.0;
    d / (d + 2.0 * k0 + 1.0)
}

fn parallel_paths<T: Send>(n_paths: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n_paths).into_par_iter().map(f).collect()
}

/// `n_paths` skew-product Jacobi paths, path i on substream i.
pub fn jacobi_skew_ensemble(
    k0: f64,
    k1: f64,
    j0: f64,
    grid: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<JacobiSkewPath>> {
    parallel_paths(n_paths, |i| simulate_jacobi_skew(k0, k1, j0, grid, dt, &mut substream(seed, i as u64)))
}

pub fn jacobi_euler_ensemble(
    k0: f64,
    k1: f64,
    j0: f64,
    grid: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    parallel_paths(n_paths, |i| simulate_jacobi_euler(k0, k1, j0, grid, dt, &mut substream(seed, i as u64)))
}

/// State of one path in the driving clock.
#[derive(Debug, Clone, Copy)]
struct Node {
    s: f64,
    tau: f64,
    r: f64,
    theta: f64,
    additive: f64,
    jacobi: f64,
}

impl Node {
    fn lerp(&self, o: &Node, lam: f64) -> Node {
        let l = |a: f64, b: f64| a + lam * (b - a);
        Node {
            s: l(self.s, o.s),
            tau: l(self.tau, o.tau),
            r: l(self.r, o.r),
            theta: l(self.theta, o.theta),
            additive: l(self.additive, o.additive),
            jacobi: l(self.jacobi, o.jacobi),
        }
    }
}

struct Driver {
    h: f64,
    expo: f64,
    z1: Besq,
    z2: Besq,
    a: f64,
    b: f64,
    node: Node,
    dt: f64,
    /// Sum of the nominal user-clock steps taken so far.
    nominal: f64,
}

/// What happened during one driving step.
struct Step {
    next: Node,
    hit: bool,
}

impl Driver {
    fn new(sys: &DihedralSystem, start: &PolarPoint, dt: f64) -> Self {
        let f = sys.frame();
        let h = f.h;
        let s0 = (start.r / h).powf(2.0 * h);
        let c = (h * start.theta).cos();
        let a = s0 * c * c;
        let b = (s0 - a).max(0.0);
        Driver {
            h,
            expo: (h - 1.0) / h,
            z1: Besq::new(2.0 * f.m1 + 1.0),
            z2: Besq::new(2.0 * f.m0 + 1.0),
            a,
            b,
            node: Node { s: 0.0, tau: 0.0, r: start.r, theta: start.theta, additive: 0.0, jacobi: 0.0 },
            dt,
            nominal: 0.0,
        }
    }

    fn polar(&self, a: f64, b: f64) -> (f64, f64) {
        let sum = a + b;
        let r = self.h * sum.powf(0.5 / self.h);
        let theta = (a / sum).sqrt().min(1.0).acos() / self.h;
        (r, theta)
    }

    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, detect: bool) -> Result<Step> {
        let sum = self.a + self.b;
        // S moves by a relative 2h sqrt(dt)/R per step, so the step shrinks when R < h/2
        let q = 2.0 * self.node.r / self.h;
        let dt_eff = self.dt * (q * q).clamp(1e-4, 1.0);
        self.nominal += dt_eff;
        let ds = dt_eff * sum.powf(self.expo);
        let a1 = self.z1.step(self.a, ds, rng);
        let b1 = self.z2.step(self.b, ds, rng);
        let sum1 = a1 + b1;
        if !(sum1 > 0.0) || !sum1.is_finite() {
            return Err(Error::Degenerate("Z1^2 + Z2^2 left (0, inf)".into()));
        }
        let mut hit = false;
        if detect {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            hit = u1 < self.z1.zero_probability(self.a, a1, ds) || u2 < self.z2.zero_probability(self.b, b1, ds);
        }
        let dtau = 0.5 * ds * (sum.powf(-self.expo) + sum1.powf(-self.expo));
        let djac = 0.5 * ds * (1.0 / sum + 1.0 / sum1);
        let (r1, theta1) = self.polar(a1, b1);
        let r0 = self.node.r;
        let dadd = 0.5 * dtau * (1.0 / (r0 * r0) + 1.0 / (r1 * r1));
        let next = Node {
            s: self.node.s + ds,
            tau: self.node.tau + dtau,
            r: r1,
            theta: theta1,
            additive: self.node.additive + dadd,
            jacobi: self.node.jacobi + djac,
        };
        self.a = a1;
        self.b = b1;
        Ok(Step { next, hit })
    }
}

impl Driver {
    /// The driving horizon is extended automatically up to 8 times the nominal one.
    fn exhausted(&self, t_end: f64) -> bool {
        self.nominal > 8.0 * (t_end + self.dt)
    }
}

fn one_path<R: Rng + ?Sized>(sys: &DihedralSystem, cfg: &SimConfig, grid: &[f64], rng: &mut R) -> Result<Vec<Node>> {
    let t_end = grid.last().copied().unwrap_or(0.0);
    let mut drv = Driver::new(sys, &cfg.start, cfg.dt);
    let mut out = Vec::with_capacity(grid.len());
    let mut g = 0;
    while g < grid.len() && grid[g] <= 0.0 {
        out.push(drv.node);
        g += 1;
    }
    while g < grid.len() {
        if drv.exhausted(t_end) {
            return Err(Error::Horizon { reached: drv.node.tau, requested: t_end });
        }
        let step = drv.advance(rng, false)?;
        let dtau = step.next.tau - drv.node.tau;
        while g < grid.len() && grid[g] <= step.next.tau {
            let lam = (grid[g] - drv.node.tau) / dtau;
            out.push(drv.node.lerp(&step.next, lam));
            g += 1;
        }
        drv.node = step.next;
    }
    Ok(out)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) || !grid.iter().all(|t| t.is_finite()) {
        return Err(Error::Config("time grid must be nonempty, finite, nonnegative and sorted".into()));
    }
    Ok(())
}

/// Ensemble on the uniform grid of `cfg`.
pub fn build_dunkl_path(sys: &DihedralSystem, cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.validate(sys)?;
    build_dunkl_path_on_grid(sys, cfg, &cfg.grid())
}

/// Ensemble observed at the user times `grid` (which may extend past `cfg.t_max`).
pub fn build_dunkl_path_on_grid(sys: &DihedralSystem, cfg: &SimConfig, grid: &[f64]) -> Result<PathEnsemble> {
    cfg.validate(sys)?;
    check_grid(grid)?;
    let paths = parallel_paths(cfg.n_paths, |i| one_path(sys, cfg, grid, &mut substream(cfg.seed, i as u64)))?;
    let mut ens = PathEnsemble {
        times: grid.to_vec(),
        radial: Vec::with_capacity(paths.len()),
        angular: Vec::with_capacity(paths.len()),
        clocks: Vec::with_capacity(paths.len()),
    };
    for p in paths {
        ens.radial.push(p.iter().map(|n| n.r.max(0.0)).collect());
        ens.angular.push(p.iter().map(|n| n.theta.clamp(0.0, sys.chamber_angle)).collect());
        ens.clocks
            .push(p.iter().map(|n| ClockSample { driving: n.s, additive: n.additive, jacobi: n.jacobi }).collect());
    }
    Ok(ens)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSample {
    /// Hitting time, or `t_max` when censored.
    pub times: Vec<f64>,
    pub censored: Vec<bool>,
    pub t_max: f64,
    /// Both indices are >= 0, so the boundary is not reached almost surely.
    pub regime_warning: bool,
    /// Hits within a step are detected through the exact squared Bessel bridge.
    pub bridge_correction: bool,
}

impl HittingSample {
    /// Empirical P(T0 > t).
    pub fn survival(&self, t: f64) -> f64 {
        let alive = self.times.iter().zip(&self.censored).filter(|(&tt, &c)| c || tt > t).count();
        alive as f64 / self.times.len() as f64
    }

    pub fn uncensored(&self) -> usize {
        self.censored.iter().filter(|c| !**c).count()
    }
}

fn hitting_path<R: Rng + ?Sized>(sys: &DihedralSystem, cfg: &SimConfig, rng: &mut R) -> Result<Option<f64>> {
    let mut drv = Driver::new(sys, &cfg.start, cfg.dt);
    while drv.node.tau < cfg.t_max {
        if drv.exhausted(cfg.t_max) {
            return Err(Error::Horizon { reached: drv.node.tau, requested: cfg.t_max });
        }
        let step = drv.advance(rng, true)?;
        if step.hit {
            let t = 0.5 * (drv.node.tau + step.next.tau);
            return Ok((t <= cfg.t_max).then_some(t));
        }
        drv.node = step.next;
    }
    Ok(None)
}

/// First time each path reaches the chamber boundary, censored at `cfg.t_max`.
pub fn sample_hitting_time(sys: &DihedralSystem, cfg: &SimConfig) -> Result<HittingSample> {
    cfg.validate(sys)?;
    if cfg.start.theta <= 0.0 || cfg.start.theta >= sys.chamber_angle {
        return Err(Error::Config("hitting runs need a start strictly inside the chamber".into()));
    }
    let f = sys.frame();
    let regime_warning = f.l0() >= 0.0 && f.l1() >= 0.0;
    let hits = parallel_paths(cfg.n_paths, |i| hitting_path(sys, cfg, &mut substream(cfg.seed, i as u64)))?;
    Ok(HittingSample {
        times: hits.iter().map(|h| h.unwrap_or(cfg.t_max)).collect(),
        censored: hits.iter().map(|h| h.is_none()).collect(),
        t_max: cfg.t_max,
        regime_warning,
        bridge_correction: true,
    })
}
