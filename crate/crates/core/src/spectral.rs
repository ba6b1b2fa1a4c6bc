//! Spectral series for the radial Dunkl semigroup on a dihedral chamber.
//!
//! The angular eigenbasis is
//! e_j(theta) = sqrt(4h 2^{l0+l1}) Phat_j(cos 2h theta),
//! orthonormal in L2([0, pi/n], s(theta) d theta) with
//! s(theta) = sin^{2 m0}(h theta) cos^{2 m1}(h theta) (see [`AngularFrame`]).
//! Every kernel here is a density with respect to dr d theta and so carries
//! the polar factor r.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::dihedral::{AngularFrame, DihedralSystem, PolarPoint};
use crate::error::{domain, Error, Result};
use crate::quad;
use crate::series::{Accumulator, SeriesControl};
use crate::specfun::{chebyshev_t, chebyshev_u, lgamma, ln_bessel_i, ln_bessel_i_scaled, ln_beta, OrthoJacobi};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub value: f64,
    pub terms_used: usize,
    pub truncation_bound: f64,
    /// Set when a small negative truncation artefact was clamped to zero.
    pub clamped: bool,
}

impl DensityValue {
    fn zero() -> Self {
        DensityValue { value: 0.0, terms_used: 0, truncation_bound: 0.0, clamped: false }
    }

    fn from_sum(acc: &Accumulator, scale: f64) -> Self {
        let raw = acc.sum() * scale;
        DensityValue {
            value: raw.max(0.0),
            terms_used: acc.terms(),
            truncation_bound: (acc.last() * scale).abs(),
            clamped: raw < 0.0,
        }
    }
}

/// lambda_j = -2 j (j + k0 + k1); for odd n, -2 j (j + k).
pub fn angular_eigenvalue(sys: &DihedralSystem, j: usize) -> f64 {
    let j = j as f64;
    -2.0 * j * (j + sys.k0 + sys.k1)
}

/// ln e_0^2 = ln(2h / B(m0 + 1/2, m1 + 1/2)).
fn ln_e0_sq(f: &AngularFrame) -> f64 {
    (2.0 * f.h).ln() - ln_beta(f.m0 + 0.5, f.m1 + 0.5)
}

/// e_j(phi) e_j(theta) / Phat_j(x_phi) Phat_j(x_theta).
fn basis_scale(f: &AngularFrame) -> f64 {
    4.0 * f.h * 2f64.powf(f.l0() + f.l1())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("time must be positive and finite, got {t}"));
    }
    Ok(())
}

fn check_points(sys: &DihedralSystem, x: &PolarPoint, y: &PolarPoint) -> Result<()> {
    for p in [x, y] {
        if !sys.contains(p) {
            return domain(format!("point {p:?} outside the chamber of I2({})", sys.n));
        }
    }
    Ok(())
}

/// sum_j radial(j) e_j(phi) e_j(theta).
fn eigen_sum(
    f: &AngularFrame,
    phi: f64,
    theta: f64,
    ctl: &SeriesControl,
    mut radial: impl FnMut(usize) -> f64,
) -> Result<Accumulator> {
    let params = f.jacobi_params();
    let c = basis_scale(f);
    let mut pa = OrthoJacobi::new(params, (2.0 * f.h * phi).cos());
    let mut pb = OrthoJacobi::new(params, (2.0 * f.h * theta).cos());
    Accumulator::run(ctl, |j| {
        let (a, b) = (pa.next().unwrap(), pb.next().unwrap());
        let r = radial(j);
        if r == 0.0 {
            0.0
        } else {
            r * c * a * b
        }
    })
}

/// Density of the angular Jacobi-type diffusion on [0, pi/2]:
/// m_t(phi, theta) = mu(theta) sum_j e^{lambda_j t} Q_j(phi) Q_j(theta),
/// Q_j = Phat_j / Phat_0 in the variable cos 2 theta.
pub fn angular_density(
    sys: &DihedralSystem,
    t: f64,
    phi: f64,
    theta: f64,
    ctl: &SeriesControl,
) -> Result<DensityValue> {
    check_time(t)?;
    let half = PI / 2.0;
    if !(0.0..=half).contains(&phi) || !(0.0..=half).contains(&theta) {
        return domain(format!("angles must lie in [0, pi/2], got ({phi}, {theta})"));
    }
    let f = sys.frame();
    let params = f.jacobi_params();
    let ln_mass = params.ln_mass();
    let mu =
        theta.sin().powf(2.0 * f.m0) * theta.cos().powf(2.0 * f.m1) / (0.5 * ln_beta(f.m0 + 0.5, f.m1 + 0.5).exp());
    let mut pa = OrthoJacobi::new(params, (2.0 * phi).cos());
    let mut pb = OrthoJacobi::new(params, (2.0 * theta).cos());
    let acc = Accumulator::run(ctl, |j| {
        let jf = j as f64;
        let lam = -2.0 * jf * (jf + f.m0 + f.m1);
        (lam * t).exp() * ln_mass.exp() * pa.next().unwrap() * pb.next().unwrap()
    })?;
    Ok(DensityValue::from_sum(&acc, mu))
}

/// Angular density on the chamber: K_t(phi, theta) = h m_{h^2 t}(h phi, h theta).
pub fn chamber_angular_density(
    sys: &DihedralSystem,
    t: f64,
    phi: f64,
    theta: f64,
    ctl: &SeriesControl,
) -> Result<DensityValue> {
    let h = sys.frame().h;
    let mut v = angular_density(sys, h * h * t, h * phi, h * theta, ctl)?;
    v.value *= h;
    v.truncation_bound *= h;
    Ok(v)
}

/// Bessel process semigroup density q_t(rho, r) of index gamma, w.r.t. dr.
pub fn bessel_semigroup(gamma_idx: f64, t: f64, rho: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if rho == 0.0 {
        let ln = (2.0 * gamma_idx + 1.0) * r.ln()
            - r * r / (2.0 * t)
            - gamma_idx * std::f64::consts::LN_2
            - lgamma(gamma_idx + 1.0)
            - (gamma_idx + 1.0) * t.ln();
        return ln.exp();
    }
    let z = rho * r / t;
    let ln =
        gamma_idx * (r / rho).ln() + r.ln() - t.ln() - (rho - r).powi(2) / (2.0 * t) + ln_bessel_i_scaled(gamma_idx, z);
    ln.exp()
}

/// E[exp(h^2 lambda_j A_t) | rho, r] = I_{2jh+gamma}(rho r/t) / I_gamma(rho r/t).
pub fn conditional_laplace(sys: &DihedralSystem, j: usize, t: f64, rho: f64, r: f64) -> f64 {
    let f = sys.frame();
    let z = rho * r / t;
    if j == 0 {
        return 1.0;
    }
    if z == 0.0 {
        return 0.0;
    }
    (ln_bessel_i_scaled(f.bessel_index(j), z) - ln_bessel_i_scaled(f.gamma(), z)).exp()
}

/// Transition density p_t(x, y) of the radial Dunkl process w.r.t. dr d theta.
pub fn transition_density(
    sys: &DihedralSystem,
    t: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    ctl: &SeriesControl,
) -> Result<DensityValue> {
    check_time(t)?;
    check_points(sys, x, y)?;
    let f = sys.frame();
    let g = f.gamma();
    let (rho, r) = (x.r, y.r);
    if r == 0.0 {
        return Ok(DensityValue::zero());
    }
    let s = f.angular_weight(y.theta);
    if rho == 0.0 {
        let ln = g * (r * r / (2.0 * t)).ln() - lgamma(g + 1.0) + ln_e0_sq(&f) + r.ln() - r * r / (2.0 * t) - t.ln();
        let v = ln.exp() * s;
        return Ok(DensityValue { value: v, terms_used: 1, truncation_bound: 0.0, clamped: false });
    }
    let z = rho * r / t;
    let ln_pref = g * (r / rho).ln() - (rho - r).powi(2) / (2.0 * t);
    let acc = eigen_sum(&f, x.theta, y.theta, ctl, |j| (ln_pref + ln_bessel_i_scaled(f.bessel_index(j), z)).exp())?;
    Ok(DensityValue::from_sum(&acc, r * s / t))
}

/// Generalized Bessel function D_k^W(x, y), normalized by D(0, y) = |W|.
pub fn generalized_bessel(sys: &DihedralSystem, x: &PolarPoint, y: &PolarPoint, ctl: &SeriesControl) -> Result<f64> {
    check_points(sys, x, y)?;
    let w = x.r * y.r;
    let order = sys.group_order as f64;
    if w == 0.0 {
        return Ok(order);
    }
    let f = sys.frame();
    let g = f.gamma();
    // c = |W| Gamma(gamma+1) 2^gamma / e_0^2
    let ln_c = order.ln() + lgamma(g + 1.0) + g * std::f64::consts::LN_2 - ln_e0_sq(&f);
    let acc = eigen_sum(&f, x.theta, y.theta, ctl, |j| (ln_c - g * w.ln() + ln_bessel_i(f.bessel_index(j), w)).exp())?;
    let v = acc.sum();
    if !v.is_finite() {
        return Err(Error::Overflow(format!("D_k^W overflows at rho r = {w}")));
    }
    Ok(v)
}

type ConstantCache = Mutex<HashMap<(u32, u64, u64), f64>>;

fn ck_cache() -> &'static ConstantCache {
    static CACHE: OnceLock<ConstantCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// c_k = |W| int_C exp(-|y|^2/2) omega_k(y)^2 dy, by quadrature (cached per system).
pub fn heat_constant(sys: &DihedralSystem) -> f64 {
    let key = (sys.n, sys.k0.to_bits(), sys.k1.to_bits());
    if let Some(&c) = ck_cache().lock().unwrap().get(&key) {
        return c;
    }
    let f = sys.frame();
    let g = f.gamma();
    let radial = |r: f64| r.powf(2.0 * g + 1.0) * (-0.5 * r * r).exp();
    let r_max = (2.0 * g + 1.0).sqrt() + 12.0;
    let breaks: Vec<f64> = (0..=16).map(|i| r_max * i as f64 / 16.0).collect();
    let radial_int = quad::adaptive_panels(&radial, &breaks, 1e-14, 1e-300);
    let ang = |th: f64| f.angular_weight(th);
    let ang_int = quad::adaptive(&ang, 0.0, sys.chamber_angle, 1e-14, 1e-300);
    let c = sys.group_order as f64 * radial_int * ang_int;
    *ck_cache().lock().unwrap().entry(key).or_insert(c)
}

/// The same density rebuilt from the template
/// r e^{-(|x|^2+|y|^2)/2t} D_k^W(x/sqrt t, y/sqrt t) omega_k(y)^2 / (c_k t^{gamma+1}).
pub fn transition_density_via_bessel(
    sys: &DihedralSystem,
    t: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    ctl: &SeriesControl,
) -> Result<f64> {
    check_time(t)?;
    let f = sys.frame();
    let g = f.gamma();
    let st = t.sqrt();
    let d = generalized_bessel(sys, &PolarPoint::new(x.r / st, x.theta), &PolarPoint::new(y.r / st, y.theta), ctl)?;
    let omega_sq = y.r.powf(2.0 * g) * f.angular_weight(y.theta);
    let gauss = (-(x.r * x.r + y.r * y.r) / (2.0 * t)).exp();
    Ok(y.r * gauss * d * omega_sq / (heat_constant(sys) * t.powf(g + 1.0)))
}

/// Shared prefactor r e^{-(rho-r)^2/2t} / t and argument rho r / t for planar kernels.
fn planar_parts(t: f64, x: &PolarPoint, y: &PolarPoint) -> (f64, f64) {
    let pref = y.r * (-(x.r - y.r).powi(2) / (2.0 * t)).exp() / t;
    (pref, x.r * y.r / t)
}

/// Reflected planar Brownian motion in the wedge (k = 0).
pub fn reflected_kernel(
    sys: &DihedralSystem,
    t: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    ctl: &SeriesControl,
) -> Result<DensityValue> {
    check_time(t)?;
    check_points(sys, x, y)?;
    if !sys.is_zero() {
        return Err(Error::Regime("reflected kernel needs k = 0".into()));
    }
    let n = sys.n as f64;
    let (pref, z) = planar_parts(t, x, y);
    let (cp, ct) = ((n * x.theta).cos(), (n * y.theta).cos());
    let acc = Accumulator::run(ctl, |l| {
        let w = if l == 0 { 1.0 } else { 2.0 };
        w * ln_bessel_i_scaled(l as f64 * n, z).exp() * chebyshev_t(l, cp) * chebyshev_t(l, ct)
    })?;
    Ok(DensityValue::from_sum(&acc, pref * n / PI))
}

/// Planar Brownian motion killed on the wedge boundary; depends on n only.
pub fn killed_kernel(
    sys: &DihedralSystem,
    t: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    ctl: &SeriesControl,
) -> Result<DensityValue> {
    check_time(t)?;
    check_points(sys, x, y)?;
    if x.r == 0.0 || y.r == 0.0 {
        return Ok(DensityValue::zero());
    }
    let n = sys.n as f64;
    let (pref, z) = planar_parts(t, x, y);
    let acc = Accumulator::run(ctl, |i| {
        let l = (i + 1) as f64;
        ln_bessel_i_scaled(l * n, z).exp() * (l * n * x.theta).sin() * (l * n * y.theta).sin()
    })?;
    Ok(DensityValue::from_sum(&acc, pref * 2.0 * n / PI))
}

/// Brownian motion conditioned to stay in the wedge (k = 1), second-kind Chebyshev form.
pub fn conditioned_kernel(
    sys: &DihedralSystem,
    t: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    ctl: &SeriesControl,
) -> Result<DensityValue> {
    check_time(t)?;
    check_points(sys, x, y)?;
    if !sys.is_one() {
        return Err(Error::Regime("conditioned kernel needs k = 1".into()));
    }
    if y.r == 0.0 {
        return Ok(DensityValue::zero());
    }
    let n = sys.n as f64;
    let (pref, z) = planar_parts(t, x, y);
    let wall = (n * y.theta).sin().powi(2);
    if x.r == 0.0 {
        // (r/rho)^n I_n(rho r/t) -> (r^2/2t)^n / n!
        let ln = n * (y.r * y.r / (2.0 * t)).ln() - lgamma(n + 1.0) - y.r * y.r / (2.0 * t);
        let v = y.r / t * 2.0 * n / PI * wall * ln.exp();
        return Ok(DensityValue { value: v, terms_used: 1, truncation_bound: 0.0, clamped: false });
    }
    let (cp, ct) = ((n * x.theta).cos(), (n * y.theta).cos());
    let ln_ratio = n * (y.r / x.r).ln();
    let acc = Accumulator::run(ctl, |j| {
        let l = (j + 1) as f64;
        (ln_ratio + ln_bessel_i_scaled(l * n, z)).exp() * chebyshev_u(j, cp) * chebyshev_u(j, ct)
    })?;
    Ok(DensityValue::from_sum(&acc, pref * 2.0 * n / PI * wall))
}
