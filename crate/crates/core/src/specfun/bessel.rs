//! Modified Bessel function of the first kind, real order and argument.
//!
//! Everything is computed as a logarithm first. Three regimes:
//! power series for moderate `z`, the Debye uniform expansion for large order,
//! and downward recurrence from Debye for small order with large argument.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::lgamma;
use crate::error::{domain, Error, Result};

const SERIES_MAX_Z: f64 = 30.0;
const DEBYE_MIN_NU: f64 = 50.0;
const DEBYE_TERMS: usize = 16;

/// Coefficients (ascending powers of p) of the Debye polynomials u_k(p).
fn debye_polys() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS {
            let u = &polys[k];
            let mut next = vec![0.0; u.len() + 3];
            // 1/2 p^2 (1 - p^2) u'(p)
            for (i, &c) in u.iter().enumerate().skip(1) {
                let d = c * i as f64 * 0.5;
                next[i + 1] += d;
                next[i + 3] -= d;
            }
            // 1/8 int_0^p (1 - 5 t^2) u(t) dt
            for (i, &c) in u.iter().enumerate() {
                next[i + 1] += c / (8.0 * (i + 1) as f64);
                next[i + 3] -= 5.0 * c / (8.0 * (i + 3) as f64);
            }
            polys.push(next);
        }
        polys
    })
}

fn horner(coeffs: &[f64], p: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * p + c)
}

/// ln(e^{-z} I_nu(z)) by the power series. Valid for nu > -1.
fn ln_scaled_series(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * (nu + m));
        sum += term;
        if term < 1e-17 * sum && m > 0.5 * z {
            break;
        }
    }
    nu * (0.5 * z).ln() - lgamma(nu + 1.0) + sum.ln() - z
}

/// ln(e^{-z} I_nu(z)) by the Debye expansion; accurate for nu >= 50 and any z > 0.
fn ln_scaled_debye(nu: f64, z: f64) -> f64 {
    let t = z / nu;
    let s = t.hypot(1.0);
    let p = 1.0 / s;
    let polys = debye_polys();
    let mut sum = 1.0;
    let mut nu_pow = 1.0;
    for u in polys.iter().skip(1) {
        nu_pow /= nu;
        let term = horner(u, p) * nu_pow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    // nu*eta - z written without cancellation: nu*s - z = nu/(s+t)
    nu / (s + t) + nu * (t / (1.0 + s)).ln() - 0.5 * (2.0 * PI * nu).ln() - 0.5 * s.ln() + sum.ln()
}

/// ln(e^{-z} I_nu(z)) for small order and large argument.
fn ln_scaled_recurrence(nu: f64, z: f64) -> f64 {
    let steps = (DEBYE_MIN_NU - nu).ceil().max(1.0) as usize;
    let mu = nu + steps as f64;
    let base = ln_scaled_debye(mu, z);
    let mut upper = (ln_scaled_debye(mu + 1.0, z) - base).exp();
    let mut cur = 1.0;
    let mut ln_shift = 0.0;
    let mut order = mu;
    for _ in 0..steps {
        let lower = 2.0 * order / z * cur + upper;
        upper = cur;
        cur = lower;
        order -= 1.0;
        if cur > 1e200 {
            ln_shift += cur.ln();
            upper /= cur;
            cur = 1.0;
        }
    }
    base + ln_shift + cur.ln()
}

/// ln(e^{-z} I_nu(z)); `-inf` when I_nu(z) = 0.
///
/// Orders in (-1, 0) are accepted for z <= 30, where only the series is used.
pub(crate) fn ln_bessel_i_scaled(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if z <= SERIES_MAX_Z {
        ln_scaled_series(nu, z)
    } else if nu >= DEBYE_MIN_NU {
        ln_scaled_debye(nu, z)
    } else {
        ln_scaled_recurrence(nu, z)
    }
}

/// ln I_nu(z).
pub(crate) fn ln_bessel_i(nu: f64, z: f64) -> f64 {
    ln_bessel_i_scaled(nu, z) + z
}

fn check_args(nu: f64, z: f64) -> Result<()> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return domain(format!("Bessel order must be >= 0, got {nu}"));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return domain(format!("Bessel argument must be >= 0, got {z}"));
    }
    Ok(())
}

/// I_nu(z).
pub fn bessel_i(nu: f64, z: f64) -> Result<f64> {
    check_args(nu, z)?;
    let v = ln_bessel_i(nu, z).exp();
    if v.is_infinite() {
        return Err(Error::Overflow(format!("I_{nu}({z}) exceeds f64 range")));
    }
    Ok(v)
}

/// e^{-z} I_nu(z).
pub fn bessel_i_scaled(nu: f64, z: f64) -> Result<f64> {
    check_args(nu, z)?;
    Ok(ln_bessel_i_scaled(nu, z).exp())
}
