//! Tails P(T0 > t) of the first time the process reaches the chamber boundary.
//!
//! With z = cos^2(h phi), {T0 > t} = {T_J > h^2 A_t} for the Jacobi process J
//! and the additive clock A of the independent radial part. Absolute continuity
//! of Jacobi laws turns the tail into a Jacobi eigen-series whose j-th term
//! carries the radial transform E_rho^{g0}[exp(-(nu_j^2 - g0^2)/2 A_t)].
//!
//! First case. The process has multiplicities 1 - k with 1/2 <= k0, k1 <= 1;
//! the index is -l, the clock runs on the Bessel process of index g0 = 2h - gamma,
//! c = 2(l0 + l1) and nu_j = 2jh + gamma.
//!
//! Second case. k1 < 1/2 <= k0. The change of measure from dimension d = 2k1 + 1
//! to 4 - d has kappa = l1 and c = d'(2-d)/2, and
//! gamma^2 + 2h^2 (c - lambda_j) = h^2 (2j + k0 + 1 - k1)^2 with
//! lambda_j = -2j(j + k0 + 1 - k1). The Jacobi process of dimensions (4 - d, d')
//! has weight s^{-l1} (1-s)^{l0}, which gives
//! P(T0 > t) = z^{-l1} sum_j N_j^2 P_j^{(l0,-l1)}(2z-1) F(j) W_j,
//! N_j^{-2} = int_0^1 P_j^2 s^{-l1} (1-s)^{l0} ds,
//! W_j = E_rho^{gamma}[exp(-h^2 (c - lambda_j) A_t)].
//! The case k0 < 1/2 <= k1 is its mirror image under J -> 1 - J.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dihedral::{make_system, DihedralSystem, Parity, PolarPoint};
use crate::error::{domain, Error, Result};
use crate::quad;
use crate::series::{Accumulator, SeriesControl};
use crate::simulate::HittingSample;
use crate::specfun::{
    f_integral, jacobi_standard, lgamma, ln_bessel_i_scaled, ln_hyp1f1_positive, s2_integral, OrthoJacobi, PolyParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GirsanovParams {
    pub kappa: f64,
    pub beta: f64,
    pub u: f64,
    pub v: f64,
    pub c: f64,
}

/// Parameters of the change of measure between Jacobi laws of dimensions (d1, d1') and (d2, d2').
pub fn girsanov_params(d1: f64, d1p: f64, d2: f64, d2p: f64) -> GirsanovParams {
    let kappa = (d1 - d2) / 4.0;
    let beta = (d1p - d2p) / 4.0;
    GirsanovParams {
        kappa,
        beta,
        u: kappa * ((d1 + d2) / 2.0 - 2.0),
        v: beta * ((d1p + d2p) / 2.0 - 2.0),
        c: (kappa + beta) * (2.0 - (d1 + d1p + d2 + d2p) / 2.0),
    }
}

/// E_rho^{g0}[exp(-(nu^2 - g0^2)/2 A_t)] with z = rho^2 / 2t, for nu >= g0 >= 0:
/// z^{(nu-g0)/2} Gamma((g0+nu)/2 + 1) / Gamma(nu+1) e^{-z} M((g0+nu)/2 + 1, nu + 1, z).
pub fn radial_clock_laplace(g0: f64, nu: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(g0 >= 0.0) || !(nu >= g0) || !(z >= 0.0) {
        return domain(format!("radial clock transform needs nu >= g0 >= 0, z >= 0; got ({g0}, {nu}, {z})"));
    }
    if z == 0.0 {
        return Ok(if nu == g0 { 1.0 } else { 0.0 });
    }
    let a = 0.5 * (g0 + nu) + 1.0;
    let ln_m = ln_hyp1f1_positive(a, nu + 1.0, z, ctl)?;
    Ok((0.5 * (nu - g0) * z.ln() + lgamma(a) - lgamma(nu + 1.0) - z + ln_m).exp())
}

/// The same transform as an integral of the Feynman-Kac kernel
/// (r/t)(r/rho)^{g0} e^{-(rho^2+r^2)/2t} I_nu(rho r/t) over r > 0.
pub fn radial_clock_laplace_quad(g0: f64, nu: f64, t: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return if nu == g0 { 1.0 } else { 0.0 };
    }
    let f = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let w = rho * r / t;
        ((r / t).ln() + g0 * (r / rho).ln() - (rho - r).powi(2) / (2.0 * t) + ln_bessel_i_scaled(nu, w)).exp()
    };
    // the kernel is concentrated near the bulk of q_t^{g0}
    let st = t.sqrt();
    let hi = rho + (2.0 * (g0 + 1.0)).sqrt() * st + 14.0 * st;
    let lo = (rho - 14.0 * st).max(0.0);
    let n = 32;
    let mut breaks: Vec<f64> = Vec::with_capacity(n + 2);
    if lo > 0.0 {
        breaks.push(0.0);
    }
    breaks.extend((0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64));
    quad::adaptive_panels(&f, &breaks, 1e-13, 1e-300)
}

/// Which closed form applies to the process with the given multiplicities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HittingRegime {
    /// Both indices >= 0: the boundary is not reached almost surely.
    NeverHits,
    /// Both multiplicities <= 1/2: first case applied to the dual system 1 - k.
    Case1,
    /// Exactly one multiplicity below 1/2.
    Case2,
}

pub fn classify(process: &DihedralSystem) -> HittingRegime {
    let f = process.frame();
    match (f.m0 < 0.5, f.m1 < 0.5) {
        (false, false) => HittingRegime::NeverHits,
        (true, true) => HittingRegime::Case1,
        _ if f.m0 <= 0.5 && f.m1 <= 0.5 => HittingRegime::Case1,
        _ => HittingRegime::Case2,
    }
}

fn check_tail_args(sys: &DihedralSystem, x: &PolarPoint, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("time must be positive and finite, got {t}"));
    }
    if !(x.r > 0.0) || !(x.theta > 0.0 && x.theta < sys.chamber_angle) {
        return domain(format!("start {x:?} must be an interior point of the chamber"));
    }
    Ok(())
}

/// Sum of `term(j)` with the stopping rule; the first error raised by a term is returned.
fn run_series(ctl: &SeriesControl, mut term: impl FnMut(usize) -> Result<f64>) -> Result<(f64, usize)> {
    let mut err = None;
    let acc = Accumulator::run(ctl, |j| {
        if err.is_some() {
            return 0.0;
        }
        match term(j) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let acc = acc?;
    Ok((acc.sum(), acc.terms()))
}

fn check_case1(sys: &DihedralSystem) -> Result<()> {
    let f = sys.frame();
    let inside = |m: f64| (0.5..=1.0).contains(&m);
    if !(inside(f.m0) && inside(f.m1) && (f.m0 > 0.5 || f.m1 > 0.5)) {
        return Err(Error::Regime(format!(
            "first case needs 1/2 <= k0, k1 <= 1 with one of them > 1/2, got ({}, {})",
            f.m0, f.m1
        )));
    }
    Ok(())
}

pub(crate) fn case1_terms(sys: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<(f64, usize)> {
    check_case1(sys)?;
    check_tail_args(sys, x, t)?;
    let f = sys.frame();
    let (l0, l1) = (f.l0(), f.l1());
    let g0 = 2.0 * f.h - f.gamma();
    let z = x.r * x.r / (2.0 * t);
    let a = f.h * x.theta;
    let pref = a.sin().powf(2.0 * l0) * a.cos().powf(2.0 * l1) * 2.0 * f.h * 2f64.powf(l0 + l1);
    let mut basis = OrthoJacobi::new(f.jacobi_params(), (2.0 * a).cos());
    run_series(ctl, |j| {
        let p = basis.next().unwrap();
        let s2 = s2_integral(j, sys, true);
        if s2 == 0.0 || p == 0.0 {
            return Ok(0.0);
        }
        Ok(pref * s2 * p * radial_clock_laplace(g0, f.bessel_index(j), z, ctl)?)
    })
}

/// P_x(T0 > t) for the process of multiplicities 1 - k, where `sys` carries k with
/// 1/2 <= k0, k1 <= 1 (index -l).
pub fn tail_series_case1(sys: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<f64> {
    Ok(case1_terms(sys, x, t, ctl)?.0.clamp(0.0, 1.0))
}

/// int_0^1 Qhat_j(s) ds for j = 0..len, Qhat orthonormal under s^{b} (1-s)^{a}.
fn orthonormal_means(params: PolyParams, len: usize) -> Vec<f64> {
    let order = if len <= 255 { 128 } else { len / 2 + 2 };
    let rule = quad::gauss_legendre(order);
    let scale = 2f64.powf(0.5 * (params.a + params.b + 1.0));
    let mut iters: Vec<OrthoJacobi> = rule.nodes.iter().map(|&x| OrthoJacobi::new(params, x)).collect();
    (0..len)
        .map(|_| {
            // s = (1+x)/2, ds = dx/2
            let s: f64 = iters.iter_mut().zip(&rule.weights).map(|(it, &w)| w * it.next().unwrap()).sum();
            0.5 * scale * s
        })
        .collect()
}

/// z^{l1}(1-z)^{l0} sum_j weight(j) Qhat_j(z) int_0^1 Qhat_j.
fn jacobi_mixture(
    l0: f64,
    l1: f64,
    z: f64,
    ctl: &SeriesControl,
    mut weight: impl FnMut(usize) -> Result<f64>,
) -> Result<(f64, usize)> {
    let params = PolyParams::new(l0, l1)?;
    let means = orthonormal_means(params, ctl.max_terms);
    let scale = 2f64.powf(0.5 * (l0 + l1 + 1.0));
    let mut basis = OrthoJacobi::new(params, 2.0 * z - 1.0);
    let (sum, terms) = run_series(ctl, |j| {
        let q = scale * basis.next().unwrap();
        if means[j] == 0.0 || q == 0.0 {
            return Ok(0.0);
        }
        Ok(weight(j)? * q * means[j])
    })?;
    Ok((z.powf(l1) * (1.0 - z).powf(l0) * sum, terms))
}

/// The first-case tail via the Jacobi exit series in the s-variable, with each radial
/// transform computed by quadrature of the Feynman-Kac kernel.
pub fn tail_series_case1_jacobi(sys: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<f64> {
    check_case1(sys)?;
    check_tail_args(sys, x, t)?;
    let f = sys.frame();
    let g0 = 2.0 * f.h - f.gamma();
    let z = (f.h * x.theta).cos().powi(2);
    let (v, _) =
        jacobi_mixture(f.l0(), f.l1(), z, ctl, |j| Ok(radial_clock_laplace_quad(g0, f.bessel_index(j), t, x.r)))?;
    Ok(v.clamp(0.0, 1.0))
}

/// P_z(T > t) for the Jacobi process of index (-l1, -l0), as the reweighted
/// expectation e^{-ct} E_z^{l1,l0}[(z/J_t)^{l1} ((1-z)/(1-J_t))^{l0}], c = 2(l0 + l1).
pub fn jacobi_exit_tail(k0: f64, k1: f64, z: f64, t: f64, ctl: &SeriesControl) -> Result<f64> {
    let (l0, l1) = (k0 - 0.5, k1 - 0.5);
    if !((0.0..1.0).contains(&l0) && (0.0..1.0).contains(&l1)) {
        return Err(Error::Regime(format!("Jacobi exit tail needs 0 <= l0, l1 < 1, got ({l0}, {l1})")));
    }
    if !(z > 0.0 && z < 1.0) || !(t > 0.0) {
        return domain(format!("need z in (0, 1) and t > 0, got ({z}, {t})"));
    }
    let c = 2.0 * (l0 + l1);
    let (v, _) = jacobi_mixture(l0, l1, z, ctl, |j| {
        let jf = j as f64;
        Ok((-(2.0 * jf * (jf + k0 + k1) + c) * t).exp())
    })?;
    Ok(v.clamp(0.0, 1.0))
}

pub(crate) fn k1_terms(sys: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<(f64, usize)> {
    if !sys.is_one() {
        return Err(Error::Regime("the k = 1 form needs k0 = k1 = 1".into()));
    }
    check_tail_args(sys, x, t)?;
    let h = sys.frame().h;
    let z = x.r * x.r / (2.0 * t);
    let pref = 2.0 / PI.sqrt() * z.sqrt();
    let y = 0.5 * z;
    run_series(ctl, |j| {
        let m = (2 * j + 1) as f64;
        let d = m * h - 0.5;
        let bracket = ln_bessel_i_scaled(d, y).exp() + ln_bessel_i_scaled(d + 1.0, y).exp();
        Ok(pref * bracket * (m * 2.0 * h * x.theta).sin() / m)
    })
}

/// Wedge exit tail of planar Brownian motion, i.e. the first case at k = 1:
/// (2/sqrt pi) sqrt(z) sum_j sin((2j+1) 2h phi)/(2j+1) e^{-z/2} [I_{d_j}(z/2) + I_{d_j+1}(z/2)],
/// z = rho^2/2t, d_j = (2j+1)h - 1/2.
pub fn tail_series_k1(sys: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<f64> {
    Ok(k1_terms(sys, x, t, ctl)?.0.clamp(0.0, 1.0))
}

pub(crate) fn case2_terms(sys: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<(f64, usize)> {
    let f = sys.frame();
    let direct = f.m1 < 0.5 && f.m0 >= 0.5;
    let mirror = f.m0 < 0.5 && f.m1 >= 0.5;
    if sys.parity == Parity::Odd || !(direct || mirror) {
        return Err(Error::Regime(format!(
            "second case needs exactly one multiplicity below 1/2, got ({}, {})",
            f.m0, f.m1
        )));
    }
    check_tail_args(sys, x, t)?;
    if mirror {
        let swapped = make_system(sys.n, sys.k1, Some(sys.k0))?;
        let y = PolarPoint::new(x.r, sys.chamber_angle - x.theta);
        return case2_terms(&swapped, &y, t, ctl);
    }
    let (k0, k1) = (f.m0, f.m1);
    let (l0, l1) = (f.l0(), f.l1());
    let params = PolyParams::new(l0, -l1)?;
    let z = (f.h * x.theta).cos().powi(2);
    let u = x.r * x.r / (2.0 * t);
    let g = f.gamma();
    let ln2 = std::f64::consts::LN_2;
    let (sum, terms) = run_series(ctl, |j| {
        let fj = f_integral(j, sys)?;
        let n2 = ((params.a + params.b + 1.0) * ln2 - params.ln_norm_sq(j)).exp();
        let p = jacobi_standard(j, params, 2.0 * z - 1.0);
        let nu = f.h * (2.0 * j as f64 + k0 + 1.0 - k1);
        Ok(n2 * p * fj * radial_clock_laplace(g, nu, u, ctl)?)
    })?;
    Ok((z.powf(-l1) * sum, terms))
}

/// P_x(T0 > t) for the process of multiplicities k itself when exactly one of k0, k1 is below 1/2.
pub fn tail_series_case2(sys: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<f64> {
    Ok(case2_terms(sys, x, t, ctl)?.0.clamp(0.0, 1.0))
}

/// Bessel index of the j-th second-case term, h (2j + k0 + 1 - k1), as the root of
/// gamma^2 + 2 h^2 (c - lambda_j).
pub fn case2_bessel_index_sq(sys: &DihedralSystem, j: usize) -> f64 {
    let f = sys.frame();
    let (k0, k1) = (f.m0, f.m1);
    let d = 2.0 * k1 + 1.0;
    let dp = 2.0 * k0 + 1.0;
    let c = girsanov_params(d, dp, 4.0 - d, dp).c;
    let jf = j as f64;
    let lambda = -2.0 * jf * (jf + k0 + 1.0 - k1);
    f.gamma().powi(2) + 2.0 * f.h * f.h * (c - lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub value: f64,
    pub terms: usize,
    pub regime: HittingRegime,
}

/// Tail for the process with multiplicities `process`, choosing the closed form by regime.
pub fn hitting_tail(process: &DihedralSystem, x: &PolarPoint, t: f64, ctl: &SeriesControl) -> Result<TailPoint> {
    let regime = classify(process);
    let (value, terms) = match regime {
        HittingRegime::NeverHits => {
            return Err(Error::Regime(format!(
                "multiplicities ({}, {}) are both >= 1/2: the boundary is never reached",
                process.k0, process.k1
            )))
        }
        HittingRegime::Case1 => case1_terms(&process.dual()?, x, t, ctl)?,
        HittingRegime::Case2 => case2_terms(process, x, t, ctl)?,
    };
    Ok(TailPoint { value: value.clamp(0.0, 1.0), terms, regime })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMethod {
    Series,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub method: TailMethod,
    /// Series terms per point, or the path count for Monte Carlo.
    pub terms_or_paths: Vec<usize>,
}

impl TailCurve {
    pub fn series(process: &DihedralSystem, x: &PolarPoint, t_grid: &[f64], ctl: &SeriesControl) -> Result<TailCurve> {
        let pts: Vec<TailPoint> =
            t_grid.par_iter().map(|&t| hitting_tail(process, x, t, ctl)).collect::<Result<_>>()?;
        Ok(TailCurve {
            t_grid: t_grid.to_vec(),
            values: pts.iter().map(|p| p.value).collect(),
            method: TailMethod::Series,
            terms_or_paths: pts.iter().map(|p| p.terms).collect(),
        })
    }

    pub fn from_sample(sample: &HittingSample, t_grid: &[f64]) -> TailCurve {
        TailCurve {
            t_grid: t_grid.to_vec(),
            values: t_grid.iter().map(|&t| sample.survival(t)).collect(),
            method: TailMethod::Mc,
            terms_or_paths: vec![sample.times.len(); t_grid.len()],
        }
    }

    pub fn sup_gap(&self, other: &TailCurve) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{jacobi_skew_ensemble, sample_hitting_time, SimConfig};

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn girsanov_examples() {
        let id = girsanov_params(1.7, 2.4, 1.7, 2.4);
        assert_eq!(id, GirsanovParams { kappa: 0.0, beta: 0.0, u: 0.0, v: 0.0, c: 0.0 });
        let g = girsanov_params(2.0, 3.0, 4.0, 3.0);
        assert!(close(g.kappa, -0.5, 1e-15) && close(g.beta, 0.0, 0.0) && close(g.u, -0.5, 1e-15));
        assert!(close(g.v, 0.0, 0.0) && close(g.c, 2.0, 1e-15));
        let (d, dp) = (1.5, 3.0);
        let g = girsanov_params(d, dp, 4.0 - d, dp);
        assert!(g.beta == 0.0 && g.u == 0.0 && g.v == 0.0);
        assert!(close(g.kappa, (d - 2.0) / 2.0, 1e-15));
        assert!(close(g.c, dp * (2.0 - d) / 2.0, 1e-15));
        assert!(close(g.c, 0.75, 1e-15));
        // dimensions (2(1-l1), 2(1-l0)) against (2(1+l1), 2(1+l0)) gives c = 2(l0 + l1)
        let (l0, l1) = (0.3, 0.1);
        let g = girsanov_params(2.0 * (1.0 - l1), 2.0 * (1.0 - l0), 2.0 * (1.0 + l1), 2.0 * (1.0 + l0));
        assert!(close(g.c, 2.0 * (l0 + l1), 1e-14));
        assert!(close(g.kappa, -l1, 1e-15) && close(g.beta, -l0, 1e-15));
    }

    #[test]
    fn second_case_killing_rate_from_h_transform() {
        // x^kappa, kappa = 1 - d/2, is an eigenfunction of 2x(1-x) D^2 + (d - (d+d')x) D with eigenvalue -c
        let (d, dp): (f64, f64) = (1.5, 3.0);
        let kappa = 1.0 - d / 2.0;
        let lx = |x: f64| {
            let f1 = kappa * x.powf(kappa - 1.0);
            let f2 = kappa * (kappa - 1.0) * x.powf(kappa - 2.0);
            2.0 * x * (1.0 - x) * f2 + (d - (d + dp) * x) * f1
        };
        for &x in &[0.1, 0.4, 0.8] {
            let ratio = lx(x) / x.powf(kappa);
            assert!(close(-ratio, girsanov_params(d, dp, 4.0 - d, dp).c, 1e-12), "x={x}: {ratio}");
        }
    }

    #[test]
    fn radial_transform_against_quadrature() {
        for &(g0, nu, t, rho) in &[
            (0.5, 2.5, 0.3, 1.0),
            (1.0, 5.0, 1.0, 2.0),
            (2.0, 2.0, 0.5, 0.7),
            (0.0, 4.0, 2.0, 1.5),
            (1.5, 9.5, 0.05, 1.0),
        ] {
            let z = rho * rho / (2.0 * t);
            let a = radial_clock_laplace(g0, nu, z, &ctl()).unwrap();
            let b = radial_clock_laplace_quad(g0, nu, t, rho);
            assert!((a - b).abs() < 1e-10, "({g0}, {nu}, {t}, {rho}): {a} vs {b}");
        }
        assert_eq!(radial_clock_laplace(1.0, 1.0, 0.0, &ctl()).unwrap(), 1.0);
        assert_eq!(radial_clock_laplace(1.0, 3.0, 0.0, &ctl()).unwrap(), 0.0);
        // nu = g0: no killing
        assert!(close(radial_clock_laplace(1.3, 1.3, 4.0, &ctl()).unwrap(), 1.0, 1e-12));
        assert!(radial_clock_laplace(2.0, 1.0, 1.0, &ctl()).is_err());
    }

    #[test]
    fn case1_small_time_limit() {
        let sys = make_system(4, 0.75, Some(0.75)).unwrap();
        let x = PolarPoint::new(1.0, PI / 16.0);
        let v = tail_series_case1(&sys, &x, 1e-4, &ctl()).unwrap();
        assert!(close(v, 1.0, 1e-4), "{v}");
    }

    #[test]
    fn case1_monotone_and_decaying() {
        let sys = make_system(4, 0.75, Some(0.75)).unwrap();
        let x = PolarPoint::new(1.0, PI / 16.0);
        let vals: Vec<f64> = (1..=50).map(|i| tail_series_case1(&sys, &x, 0.1 * i as f64, &ctl()).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(vals[49] < vals[0]);
        let far = tail_series_case1(&sys, &x, 1e4, &ctl()).unwrap();
        assert!(far < 0.05, "{far}");
    }

    #[test]
    fn case1_regime_errors() {
        let x = PolarPoint::new(1.0, 0.3);
        assert!(matches!(
            tail_series_case1(&make_system(4, 0.3, Some(0.75)).unwrap(), &x, 1.0, &ctl()),
            Err(Error::Regime(_))
        ));
        assert!(matches!(
            tail_series_case1(&make_system(4, 0.5, Some(0.5)).unwrap(), &x, 1.0, &ctl()),
            Err(Error::Regime(_))
        ));
        assert!(matches!(
            tail_series_case1(&make_system(4, 1.2, Some(0.75)).unwrap(), &x, 1.0, &ctl()),
            Err(Error::Regime(_))
        ));
        let sys = make_system(4, 0.75, Some(0.75)).unwrap();
        assert!(tail_series_case1(&sys, &PolarPoint::new(1.0, 0.0), 1.0, &ctl()).is_err());
    }

    #[test]
    fn case1_equals_jacobi_route() {
        for (n, k0, k1) in [(4, 0.75, 0.75), (4, 0.9, 0.6), (6, 1.0, 0.5), (3, 0.8, 0.0)] {
            let sys = make_system(n, k0, (n % 2 == 0).then_some(k1)).unwrap();
            let mut gap: f64 = 0.0;
            for &u in &[0.2, 0.5, 0.8] {
                let x = PolarPoint::new(1.0, u * sys.chamber_angle);
                for &t in &[0.1, 0.5, 1.0, 3.0] {
                    let a = tail_series_case1(&sys, &x, t, &ctl()).unwrap();
                    let b = tail_series_case1_jacobi(&sys, &x, t, &ctl()).unwrap();
                    gap = gap.max((a - b).abs());
                }
            }
            assert!(gap < 1e-6, "({n}, {k0}, {k1}): {gap}");
        }
    }

    #[test]
    fn k1_closed_form_equals_case1() {
        for n in [4u32, 6, 3] {
            let sys = make_system(n, 1.0, (n % 2 == 0).then_some(1.0)).unwrap();
            for &u in &[0.1, 0.37, 0.5, 0.9] {
                for &t in &[0.05, 0.2, 1.0, 4.0] {
                    let x = PolarPoint::new(1.0, u * sys.chamber_angle);
                    let a = tail_series_case1(&sys, &x, t, &ctl()).unwrap();
                    let b = tail_series_k1(&sys, &x, t, &ctl()).unwrap();
                    assert!((a - b).abs() <= 1e-9 * a.max(1e-3), "n={n} u={u} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn k1_closed_form_boundary_limit() {
        let sys = make_system(4, 1.0, Some(1.0)).unwrap();
        let v = tail_series_k1(&sys, &PolarPoint::new(1.0, 1e-6), 1.0, &ctl()).unwrap();
        assert!(v < 1e-5);
        assert!(
            tail_series_k1(&make_system(4, 0.75, Some(1.0)).unwrap(), &PolarPoint::new(1.0, 0.3), 1.0, &ctl()).is_err()
        );
    }

    #[test]
    fn case2_small_time_and_regimes() {
        let sys = make_system(4, 0.75, Some(0.25)).unwrap();
        let x = PolarPoint::new(1.0, PI / 16.0);
        let v = tail_series_case2(&sys, &x, 1e-4, &ctl()).unwrap();
        assert!(close(v, 1.0, 1e-3), "{v}");
        assert!(tail_series_case2(&make_system(4, 0.75, Some(0.75)).unwrap(), &x, 1.0, &ctl()).is_err());
        assert!(tail_series_case2(&make_system(5, 0.3, None).unwrap(), &x, 1.0, &ctl()).is_err());
        let vals: Vec<f64> = (1..=30).map(|i| tail_series_case2(&sys, &x, 0.1 * i as f64, &ctl()).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn case2_mirror_symmetry() {
        let a = make_system(4, 0.75, Some(0.25)).unwrap();
        let b = make_system(4, 0.25, Some(0.75)).unwrap();
        let x = PolarPoint::new(1.2, 0.3);
        let y = PolarPoint::new(1.2, a.chamber_angle - 0.3);
        for &t in &[0.2, 1.0] {
            let va = tail_series_case2(&a, &x, t, &ctl()).unwrap();
            let vb = tail_series_case2(&b, &y, t, &ctl()).unwrap();
            assert!((va - vb).abs() < 1e-13);
        }
    }

    #[test]
    fn case2_index_radicand_is_perfect_square() {
        for &(k0, k1) in &[(0.75, 0.25), (1.3, 0.1), (0.5, 0.0)] {
            let sys = make_system(4, k0, Some(k1)).unwrap();
            for j in 0..=50 {
                let sq = case2_bessel_index_sq(&sys, j);
                let nu = sys.frame().h * (2.0 * j as f64 + k0 + 1.0 - k1);
                assert!(sq >= 0.0);
                assert!((sq.sqrt() - nu).abs() < 1e-10 * nu, "j={j}");
            }
        }
    }

    #[test]
    fn jacobi_exit_examples() {
        let v = jacobi_exit_tail(0.75, 0.75, 0.4, 1e-4, &ctl()).unwrap();
        assert!(close(v, 1.0, 1e-4), "{v}");
        for &t in &[0.05, 0.3, 1.0] {
            let a = jacobi_exit_tail(0.9, 0.6, 0.3, t, &ctl()).unwrap();
            let b = jacobi_exit_tail(0.6, 0.9, 0.7, t, &ctl()).unwrap();
            assert!((a - b).abs() < 1e-10, "t={t}");
        }
        assert!(jacobi_exit_tail(0.3, 0.75, 0.4, 1.0, &ctl()).is_err());
    }

    #[test]
    fn jacobi_exit_against_reweighted_simulation() {
        let (k0, k1, z, t) = (0.75, 0.9, 0.4, 0.3);
        let (l0, l1) = (k0 - 0.5, k1 - 0.5);
        let c = 2.0 * (l0 + l1);
        let ens = jacobi_skew_ensemble(k0, k1, z, &[t], 5e-4, 40_000, 77).unwrap();
        let vals: Vec<f64> = ens
            .iter()
            .map(|p| {
                let j = p.j[0].clamp(1e-300, 1.0 - 1e-16);
                (-c * t).exp() * (z / j).powf(l1) * ((1.0 - z) / (1.0 - j)).powf(l0)
            })
            .collect();
        let mc = vals.iter().sum::<f64>() / vals.len() as f64;
        let series = jacobi_exit_tail(k0, k1, z, t, &ctl()).unwrap();
        assert!((mc - series).abs() < 0.01, "{mc} vs {series}");
    }

    #[test]
    fn classification() {
        let s = |k0: f64, k1: f64| make_system(4, k0, Some(k1)).unwrap();
        assert_eq!(classify(&s(1.0, 0.5)), HittingRegime::NeverHits);
        assert_eq!(classify(&s(0.5, 0.5)), HittingRegime::NeverHits);
        assert_eq!(classify(&s(0.25, 0.25)), HittingRegime::Case1);
        assert_eq!(classify(&s(0.5, 0.2)), HittingRegime::Case1);
        assert_eq!(classify(&s(0.75, 0.25)), HittingRegime::Case2);
        assert_eq!(classify(&s(0.25, 2.0)), HittingRegime::Case2);
        assert_eq!(classify(&make_system(3, 0.3, None).unwrap()), HittingRegime::Case1);
        let x = PolarPoint::new(1.0, 0.3);
        assert!(hitting_tail(&s(1.0, 0.5), &x, 1.0, &ctl()).is_err());
    }

    #[test]
    fn symmetric_case_matches_simulation() {
        // the process of multiplicities (0.25, 0.25) is the -l process of (0.75, 0.75)
        let sys = make_system(4, 0.75, Some(0.75)).unwrap();
        let process = sys.dual().unwrap();
        let x = PolarPoint::new(1.0, PI / 16.0);
        let mut cfg = SimConfig::new(2.0, 2e-3, 20_000, 31, x);
        cfg.grid_points = 21;
        let hs = sample_hitting_time(&process, &cfg).unwrap();
        let grid: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
        let mc = TailCurve::from_sample(&hs, &grid);
        let series = TailCurve::series(&process, &x, &grid, &ctl()).unwrap();
        assert!(series.is_monotone(1e-12));
        let gap = series.sup_gap(&mc);
        assert!(gap < 0.03, "{gap}");
    }
}
