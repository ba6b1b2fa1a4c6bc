use std::fmt::Write as _;

use dunkl_core::hermite::{hermite_w, lattice, mehler_check};
use dunkl_core::hitting::{classify, TailCurve};
use dunkl_core::simulate::{build_dunkl_path, sample_hitting_time, SimConfig};
use dunkl_core::spectral::{generalized_bessel, reflected_kernel, transition_density};
use dunkl_core::validate::{check_mc_radial, run_all, CheckName, Snapshot, ValidationConfig};
use dunkl_core::{DihedralSystem, Error, PolarPoint, Result};
use serde_json::{json, Value};

use crate::args::{
    grid_sizes, point, time_grid, Common, DensityArgs, GbfArgs, HermiteArgs, HittingArgs, SimulateArgs, ValidateArgs,
};

/// Text of a finished command and whether it reports a validation failure.
pub struct Output {
    pub text: String,
    pub failed: bool,
}

fn header(command: &str, common: &Common, sys: &DihedralSystem, params: Value) -> String {
    let meta = json!({
        "command": command,
        "system": { "n": sys.n, "k0": sys.k0, "k1": sys.k1 },
        "seed": common.seed,
        "tol": common.tol,
        "max_terms": common.max_terms,
        "params": params,
        "version": env!("CARGO_PKG_VERSION"),
    });
    format!("# {meta}\n")
}

fn check_start(sys: &DihedralSystem, x: &PolarPoint, flag: &str) -> Result<()> {
    if !sys.contains(x) {
        return Err(Error::Domain(format!(
            "{flag} {:?} lies outside the chamber [0, {}]",
            (x.r, x.theta),
            sys.chamber_angle
        )));
    }
    Ok(())
}

fn angle_grid(sys: &DihedralSystem, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5 * sys.chamber_angle];
    }
    (0..m).map(|j| sys.chamber_angle * j as f64 / (m - 1) as f64).collect()
}

pub fn density(common: &Common, a: &DensityArgs) -> Result<Output> {
    let sys = common.system()?;
    let ctl = common.control()?;
    let x = point(&a.from, "--from")?;
    check_start(&sys, &x, "--from")?;
    let (nr, nth) = grid_sizes(&a.grid)?;
    let r_max = a.r_max.unwrap_or(x.r + 4.0 * a.t.max(0.0).sqrt());
    if !(r_max > 0.0) {
        return Err(Error::Config(format!("--r-max must be positive, got {r_max}")));
    }
    let kernel = if sys.is_zero() { "reflected" } else { "spectral" };
    let mut out = header(
        "density",
        common,
        &sys,
        json!({ "t": a.t, "from": [x.r, x.theta], "r_max": r_max, "grid": [nr, nth], "kernel": kernel }),
    );
    out.push_str("r,theta,density,terms\n");
    for i in 1..=nr {
        let r = r_max * i as f64 / nr as f64;
        for j in 0..nth {
            let th = sys.chamber_angle * (j as f64 + 0.5) / nth as f64;
            let y = PolarPoint::new(r, th);
            let d = if sys.is_zero() {
                reflected_kernel(&sys, a.t, &x, &y, &ctl)?
            } else {
                transition_density(&sys, a.t, &x, &y, &ctl)?
            };
            writeln!(out, "{r},{th},{:e},{}", d.value, d.terms_used).unwrap();
        }
    }
    Ok(Output { text: out, failed: false })
}

pub fn gbf(common: &Common, a: &GbfArgs) -> Result<Output> {
    let sys = common.system()?;
    let ctl = common.control()?;
    let x = point(&a.x, "--x")?;
    check_start(&sys, &x, "--x")?;
    let (nr, nth) = grid_sizes(&a.grid)?;
    let mut out = header("gbf", common, &sys, json!({ "x": [x.r, x.theta], "r_max": a.r_max, "grid": [nr, nth] }));
    out.push_str("y_r,y_theta,value,swapped\n");
    for i in 0..nr {
        let r = if nr == 1 { 0.0 } else { a.r_max * i as f64 / (nr - 1) as f64 };
        for &th in &angle_grid(&sys, nth) {
            let y = PolarPoint::new(r, th);
            let v = generalized_bessel(&sys, &x, &y, &ctl)?;
            let w = generalized_bessel(&sys, &y, &x, &ctl)?;
            writeln!(out, "{r},{th},{v:e},{w:e}").unwrap();
        }
    }
    Ok(Output { text: out, failed: false })
}

pub const MEHLER_THRESHOLD: f64 = 1e-8;

pub fn hermite(common: &Common, a: &HermiteArgs) -> Result<Output> {
    let sys = common.system()?;
    let ctl = common.control()?;
    let x = point(&a.at, "--at")?;
    let y = point(&a.with, "--with")?;
    check_start(&sys, &x, "--at")?;
    check_start(&sys, &y, "--with")?;
    let residual = mehler_check(&sys, &x, &y, a.r, a.mehler_degree, &ctl)?;
    let mut out = header(
        "hermite",
        common,
        &sys,
        json!({ "at": [x.r, x.theta], "with": [y.r, y.theta], "degree_max": a.degree_max, "r": a.r, "mehler_degree": a.mehler_degree }),
    );
    out.push_str("q,j,degree,value\n");
    for idx in lattice(&sys, a.degree_max) {
        writeln!(out, "{},{},{},{:e}", idx.q, idx.j, idx.total_degree(&sys), hermite_w(&sys, idx, &x)).unwrap();
    }
    writeln!(out, "# mehler_residual {residual:e}").unwrap();
    Ok(Output { text: out, failed: !(residual < MEHLER_THRESHOLD) })
}

pub fn simulate(common: &Common, a: &SimulateArgs) -> Result<Output> {
    let sys = common.system()?;
    let x = point(&a.from, "--from")?;
    let mut cfg = SimConfig::new(a.t_max, a.dt, a.paths, common.seed, x);
    cfg.grid_points = a.grid_points;
    cfg.validate(&sys)?;
    let params = json!({ "t_max": a.t_max, "dt": a.dt, "paths": a.paths, "from": [x.r, x.theta], "grid_points": a.grid_points, "hitting": a.hitting });
    let mut out = header("simulate", common, &sys, params);
    if a.hitting {
        let hs = sample_hitting_time(&sys, &cfg)?;
        out.push_str("path,time,censored\n");
        for (i, (t, c)) in hs.times.iter().zip(&hs.censored).enumerate() {
            writeln!(out, "{i},{t},{c}").unwrap();
        }
        let summary = json!({ "uncensored": hs.uncensored(), "regime_warning": hs.regime_warning, "bridge_correction": hs.bridge_correction });
        writeln!(out, "# summary {summary}").unwrap();
        return Ok(Output { text: out, failed: false });
    }
    let ens = build_dunkl_path(&sys, &cfg)?;
    out.push_str("path,t,r,theta,in_chamber\n");
    let mut all_inside = true;
    for (i, (rs, ths)) in ens.radial.iter().zip(&ens.angular).enumerate() {
        for ((t, r), th) in ens.times.iter().zip(rs).zip(ths) {
            let inside = *r >= 0.0 && (0.0..=sys.chamber_angle).contains(th);
            all_inside &= inside;
            writeln!(out, "{i},{t},{r},{th},{inside}").unwrap();
        }
    }
    let last = ens.times.len() - 1;
    let snap = Snapshot { sys, start: x, t: a.t_max, radial: ens.radial_at(last), angular: ens.angular_at(last) };
    let ks = check_mc_radial(&snap)?;
    let summary = json!({ "all_in_chamber": all_inside, "radial_ks_p": ks.statistic, "radial_ks_statistic": ks.meta["ks_statistic"] });
    writeln!(out, "# summary {summary}").unwrap();
    Ok(Output { text: out, failed: !all_inside })
}

pub fn hitting(common: &Common, a: &HittingArgs) -> Result<Output> {
    let sys = common.system()?;
    let ctl = common.control()?;
    let x = point(&a.from, "--from")?;
    if !(x.r > 0.0 && x.theta > 0.0 && x.theta < sys.chamber_angle) {
        return Err(Error::Domain(format!("--from {:?} must be an interior chamber point", (x.r, x.theta))));
    }
    let grid = time_grid(&a.t_grid)?;
    let series = TailCurve::series(&sys, &x, &grid, &ctl)?;
    let mc = if a.mc_paths > 0 {
        let t_max = grid[grid.len() - 1];
        let mut cfg = SimConfig::new(t_max, a.dt, a.mc_paths, common.seed, x);
        cfg.grid_points = 2;
        Some(TailCurve::from_sample(&sample_hitting_time(&sys, &cfg)?, &grid))
    } else {
        None
    };
    let params = json!({ "from": [x.r, x.theta], "t_grid": a.t_grid, "mc_paths": a.mc_paths, "dt": a.dt, "regime": classify(&sys) });
    let mut out = header("hitting", common, &sys, params);
    out.push_str(if mc.is_some() { "t,series,terms,mc\n" } else { "t,series,terms\n" });
    for (i, t) in grid.iter().enumerate() {
        write!(out, "{t},{:e},{}", series.values[i], series.terms_or_paths[i]).unwrap();
        if let Some(m) = &mc {
            write!(out, ",{}", m.values[i]).unwrap();
        }
        out.push('\n');
    }
    let mut audit = json!({ "monotone": series.is_monotone(1e-12) });
    if let Some(m) = &mc {
        audit["sup_gap"] = json!(series.sup_gap(m));
    }
    writeln!(out, "# audit {audit}").unwrap();
    Ok(Output { text: out, failed: false })
}

pub fn parse_checks(s: &str) -> Result<Vec<CheckName>> {
    match s.trim() {
        "all" => Ok(CheckName::ALL.to_vec()),
        "" | "none" => Ok(vec![]),
        list => list.split(',').map(|c| c.trim().parse()).collect(),
    }
}

pub fn validate(common: &Common, a: &ValidateArgs) -> Result<Output> {
    let cfg = ValidationConfig {
        seed: common.seed,
        checks: parse_checks(&a.checks)?,
        mc_paths: a.mc_paths,
        wedge_paths: a.wedge_paths,
        ctl: common.control()?,
    };
    let reports = run_all(&cfg);
    let failed = reports.iter().any(|r| !r.passed);
    let mut text = serde_json::to_string_pretty(&reports).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    Ok(Output { text, failed })
}
