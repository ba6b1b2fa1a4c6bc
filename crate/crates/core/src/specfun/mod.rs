//! Scalar special functions and orthogonal polynomials.

mod bessel;
mod hyper;
mod poly;

pub use bessel::{bessel_i, bessel_i_scaled};
pub(crate) use bessel::{ln_bessel_i, ln_bessel_i_scaled};
pub(crate) use hyper::ln_hyp1f1_positive;
pub use hyper::{hyp0f1, hyp1f1};
pub use poly::{chebyshev_t, chebyshev_u, gen_gegenbauer, gen_gegenbauer_constant, jacobi_p, laguerre_l, PolyParams};
pub(crate) use poly::{jacobi_standard, laguerre_unchecked, OrthoJacobi};

use crate::dihedral::DihedralSystem;
use crate::error::{domain, Error, Result};
use crate::quad;

/// log Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("ln_gamma needs x > 0, got {x}"));
    }
    Ok(lgamma(x))
}

pub(crate) fn lgamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// S_2(j) = (1/h) int_0^1 P_j(2s - 1) ds with P_j the Jacobi polynomial of the
/// system's angular parameters (l0, l1), orthonormal when `normalized`.
/// Here h is half the polygon order (the parameter p for even n).
pub fn s2_integral(j: usize, sys: &DihedralSystem, normalized: bool) -> f64 {
    let frame = sys.frame();
    let params = frame.jacobi_params();
    let rule = quad::gauss_legendre(128);
    let int = rule.integrate(0.0, 1.0, |s| {
        let x = 2.0 * s - 1.0;
        if normalized {
            OrthoJacobi::new(params, x).nth(j).unwrap_or(0.0)
        } else {
            jacobi_standard(j, params, x)
        }
    });
    int / frame.h
}

/// F(j) = int_0^1 (1-s)^{l0} P_j^{(l0, -l1)}(2s - 1) ds, standard normalization.
///
/// Defined only in the second hitting regime k1 < 1/2 <= k0.
pub fn f_integral(j: usize, sys: &DihedralSystem) -> Result<f64> {
    f_integral_with_order(j, sys, 128)
}

pub fn f_integral_with_order(j: usize, sys: &DihedralSystem, order: usize) -> Result<f64> {
    let frame = sys.frame();
    if !(frame.m1 < 0.5 && frame.m0 >= 0.5) {
        return Err(Error::Regime(format!("F(j) needs k1 < 1/2 <= k0, got (k0, k1) = ({}, {})", frame.m0, frame.m1)));
    }
    let (l0, l1) = (frame.l0(), frame.l1());
    let params = PolyParams::new(l0, -l1)?;
    // s = (1+x)/2: (1-s)^{l0} ds = 2^{-l0-1} (1-x)^{l0} dx
    let rule = quad::gauss_jacobi(order, l0, 0.0);
    let int: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&x, &w)| w * jacobi_standard(j, params, x)).sum();
    Ok(int * (-(l0 + 1.0) * std::f64::consts::LN_2).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dihedral::make_system;
    use std::f64::consts::PI;

    #[test]
    fn ln_gamma_values() {
        assert!(ln_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(ln_gamma(2.0).unwrap().abs() < 1e-15);
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-1.5).is_err());
    }

    #[test]
    fn ln_gamma_half_against_series_oracle() {
        // ln Gamma(1/2) from ln Gamma(x) = -g x - ln x + sum_k (x/k - ln(1 + x/k)), Euler-Weierstrass,
        // with the tail estimated by x^2 / (2K)
        let x = 0.5f64;
        let euler_gamma = 0.577_215_664_901_532_9;
        let k_max = 2_000_000u64;
        let mut s = 0.0;
        for k in 1..=k_max {
            let r = x / k as f64;
            s += r - r.ln_1p();
        }
        let tail = x * x / (2.0 * k_max as f64);
        let oracle = -euler_gamma * x - x.ln() + s + tail;
        let v = ln_gamma(0.5).unwrap();
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
        assert!((v - PI.sqrt().ln()).abs() <= 1e-13 * v.abs());
        assert!((v - 0.5723649).abs() < 1e-7);
    }

    #[test]
    fn ln_gamma_relative_accuracy() {
        for &x in &[0.1, 0.75, 3.3, 10.5, 57.25, 1234.5] {
            // recurrence Gamma(x+1) = x Gamma(x)
            let lhs = ln_gamma(x + 1.0).unwrap();
            let rhs = ln_gamma(x).unwrap() + f64::ln(x);
            assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn s2_examples() {
        let sys = make_system(4, 0.8, Some(0.3)).unwrap();
        assert!((s2_integral(0, &sys, false) - 0.5).abs() < 1e-15);
        let sys1 = make_system(4, 1.0, Some(1.0)).unwrap();
        for j in 0..12 {
            let v = s2_integral(j, &sys1, true);
            if j % 2 == 1 {
                assert!(v.abs() < 1e-13, "j={j}: {v}");
            } else {
                let a_j = (j as f64 + 1.0) * 2.0;
                let want = 2f64.sqrt() / (PI.sqrt() * a_j);
                assert!((v - want).abs() < 1e-10, "j={j}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn f_integral_examples() {
        let sys = make_system(4, 1.0, Some(0.25)).unwrap();
        assert!((f_integral(0, &sys).unwrap() - 2.0 / 3.0).abs() < 1e-13);
        assert!(f_integral(0, &make_system(4, 0.75, Some(0.75)).unwrap()).is_err());
        assert!(f_integral(0, &make_system(5, 0.75, None).unwrap()).is_err());
    }

    #[test]
    fn f_integral_against_riemann_sum() {
        let (k0, k1) = (0.75, 0.25);
        let sys = make_system(4, k0, Some(k1)).unwrap();
        let (l0, l1) = (k0 - 0.5, k1 - 0.5);
        // w = (1-s)^{l0+1} removes the endpoint weight; midpoint rule in w
        let n = 1_000_000;
        let params = PolyParams::new(l0, -l1).unwrap();
        let mut sum = 0.0;
        for i in 0..n {
            let w = (i as f64 + 0.5) / n as f64;
            let s = 1.0 - w.powf(1.0 / (l0 + 1.0));
            sum += jacobi_p(1, params, 2.0 * s - 1.0, false).unwrap();
        }
        let oracle = sum / n as f64 / (l0 + 1.0);
        assert!((f_integral(1, &sys).unwrap() - oracle).abs() < 1e-8);
        // explicit degree-1 value
        let (a, b) = (l0, -l1);
        let exact = 1.0 - (a + b + 2.0) / (a + 2.0);
        assert!((f_integral(1, &sys).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn f_integral_order_convergence() {
        let sys = make_system(4, 0.9, Some(0.1)).unwrap();
        for j in 0..20 {
            let lo = f_integral_with_order(j, &sys, 64).unwrap();
            let hi = f_integral_with_order(j, &sys, 128).unwrap();
            assert!((lo - hi).abs() < 1e-10, "j={j}");
        }
    }
}
