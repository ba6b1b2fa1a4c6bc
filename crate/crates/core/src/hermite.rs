//! W-invariant generalized Hermite polynomials and the Mehler identity.
//!
//! H_{q,j}(rho, phi) = sqrt(q! / Gamma(2jh + q + gamma + 1)) (rho^2/2)^{jh}
//!     L_q^{2jh+gamma}(rho^2/2) pi_j(cos 2h phi),
//! with pi_j = |W| sqrt(Gamma(gamma+1)) Phat_j / Phat_0. This makes the Mehler
//! identity hold with |W| D_k^W on its right side.

use serde::{Deserialize, Serialize};

use crate::dihedral::{DihedralSystem, PolarPoint};
use crate::error::{domain, Error, Result};
use crate::series::SeriesControl;
use crate::specfun::{laguerre_unchecked, lgamma, OrthoJacobi};
use crate::spectral::generalized_bessel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HermiteIndex {
    pub q: usize,
    pub j: usize,
}

impl HermiteIndex {
    pub fn new(q: usize, j: usize) -> Self {
        HermiteIndex { q, j }
    }

    /// 2q + 2jh, i.e. 2q + 2jp for even n and 2q + jn for odd n.
    pub fn total_degree(&self, sys: &DihedralSystem) -> f64 {
        2.0 * self.q as f64 + self.j as f64 * sys.n as f64
    }
}

/// pi_j(cos 2h phi).
fn angular_factor(sys: &DihedralSystem, j: usize, phi: f64) -> f64 {
    let f = sys.frame();
    let params = f.jacobi_params();
    let p0 = (-0.5 * params.ln_mass()).exp();
    let pj = OrthoJacobi::new(params, (2.0 * f.h * phi).cos()).nth(j).unwrap();
    sys.group_order as f64 * (0.5 * lgamma(f.gamma() + 1.0)).exp() * pj / p0
}

/// h_j^W(rho, phi) = rho^{2jh} pi_j(cos 2h phi).
pub fn w_invariant_harmonic(sys: &DihedralSystem, j: usize, x: &PolarPoint) -> f64 {
    let deg = j as f64 * sys.n as f64;
    x.r.powf(deg) * angular_factor(sys, j, x.theta)
}

fn radial_part(sys: &DihedralSystem, idx: HermiteIndex, rho: f64) -> f64 {
    let f = sys.frame();
    let nu = f.bessel_index(idx.j);
    let u = 0.5 * rho * rho;
    let jh = idx.j as f64 * f.h;
    let qf = idx.q as f64;
    let ln_norm = 0.5 * (lgamma(qf + 1.0) - lgamma(qf + nu + 1.0));
    ln_norm.exp() * u.powf(jh) * laguerre_unchecked(idx.q, nu, u)
}

pub fn hermite_w(sys: &DihedralSystem, idx: HermiteIndex, x: &PolarPoint) -> f64 {
    radial_part(sys, idx, x.r) * angular_factor(sys, idx.j, x.theta)
}

/// Closed form of e^{-Delta_k/2}[rho^{2q} h_j^W]:
/// (-2)^q q! rho^{2jh} L_q^{2jh+gamma}(rho^2/2) pi_j(cos 2h phi).
pub fn heat_image(sys: &DihedralSystem, q: usize, j: usize, x: &PolarPoint) -> f64 {
    let f = sys.frame();
    let nu = f.bessel_index(j);
    let qf = q as f64;
    let sign = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
    let scale = sign * (qf * std::f64::consts::LN_2 + lgamma(qf + 1.0)).exp();
    scale * laguerre_unchecked(q, nu, 0.5 * x.r * x.r) * w_invariant_harmonic(sys, j, x)
}

/// The index lattice {(q, j) : 2q + 2jh <= degree_max}, sorted by total degree.
pub fn lattice(sys: &DihedralSystem, degree_max: usize) -> Vec<HermiteIndex> {
    let dmax = degree_max as f64;
    let mut out = Vec::new();
    let mut j = 0;
    while (j as f64) * (sys.n as f64) <= dmax {
        let mut q = 0;
        loop {
            let idx = HermiteIndex::new(q, j);
            if idx.total_degree(sys) > dmax {
                break;
            }
            out.push(idx);
            q += 1;
        }
        j += 1;
    }
    out.sort_by(|a, b| a.total_degree(sys).total_cmp(&b.total_degree(sys)).then(a.j.cmp(&b.j)));
    out
}

/// Left side sum_tau H(x) H(y) r^{|tau|} truncated at |tau| <= degree_max.
pub fn mehler_lhs(sys: &DihedralSystem, x: &PolarPoint, y: &PolarPoint, r: f64, degree_max: usize) -> f64 {
    lattice(sys, degree_max)
        .into_iter()
        .map(|idx| hermite_w(sys, idx, x) * hermite_w(sys, idx, y) * r.powf(idx.total_degree(sys)))
        .sum()
}

/// |W| (1-r^2)^{-gamma-1} exp(-r^2 (|x|^2+|y|^2) / (2(1-r^2))) D_k^W(x, r y / (1-r^2)).
pub fn mehler_rhs(sys: &DihedralSystem, x: &PolarPoint, y: &PolarPoint, r: f64, ctl: &SeriesControl) -> Result<f64> {
    let s = 1.0 - r * r;
    let g = sys.frame().gamma();
    let scaled = PolarPoint::new(r * y.r / s, y.theta);
    let d = generalized_bessel(sys, x, &scaled, ctl)?;
    let gauss = (-(r * r) * (x.r * x.r + y.r * y.r) / (2.0 * s)).exp();
    Ok(sys.group_order as f64 * s.powf(-g - 1.0) * gauss * d)
}

/// Relative residual |LHS - RHS| / |RHS| of the Mehler identity.
pub fn mehler_check(
    sys: &DihedralSystem,
    x: &PolarPoint,
    y: &PolarPoint,
    r: f64,
    degree_max: usize,
    ctl: &SeriesControl,
) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("Mehler parameter must lie in (0, 1), got {r}"));
    }
    for p in [x, y] {
        if !sys.contains(p) {
            return domain(format!("point {p:?} outside the chamber of I2({})", sys.n));
        }
    }
    let terms: Vec<(f64, f64)> = lattice(sys, degree_max)
        .into_iter()
        .map(|idx| {
            let deg = idx.total_degree(sys);
            (deg, hermite_w(sys, idx, x) * hermite_w(sys, idx, y) * r.powf(deg))
        })
        .collect();
    let lhs: f64 = terms.iter().map(|t| t.1).sum();
    // the outermost shell of the lattice estimates the truncation error
    let shell = degree_max as f64 - 2.0 * sys.frame().h.max(1.0);
    let edge: f64 = terms.iter().filter(|t| t.0 > shell).map(|t| t.1.abs()).sum();
    if !lhs.is_finite() || edge > ctl.tol.sqrt() * lhs.abs() {
        return Err(Error::NonConvergence { terms: terms.len(), last: edge });
    }
    let rhs = mehler_rhs(sys, x, y, r, ctl)?;
    Ok((lhs - rhs).abs() / rhs.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dihedral::make_system;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    fn systems() -> Vec<DihedralSystem> {
        vec![
            make_system(4, 1.0, Some(0.5)).unwrap(),
            make_system(3, 0.7, None).unwrap(),
            make_system(6, 1.0, Some(1.0)).unwrap(),
        ]
    }

    #[test]
    fn mehler_example_point() {
        let sys = make_system(4, 1.0, Some(0.5)).unwrap();
        let x = PolarPoint::new(0.8, PI / 9.0);
        let y = PolarPoint::new(1.1, PI / 7.0);
        let res = mehler_check(&sys, &x, &y, 0.3, 80, &ctl()).unwrap();
        assert!(res < 1e-8, "{res}");
    }

    #[test]
    fn mehler_test_matrix() {
        let fracs = [
            (0.1, 0.3, 0.2, 0.9),
            (0.5, 0.5, 1.0, 1.3),
            (0.9, 0.05, 1.7, 0.4),
            (0.0, 1.0, 0.6, 2.0),
            (0.33, 0.66, 2.2, 1.9),
        ];
        for sys in systems() {
            let a = sys.chamber_angle;
            for &(u, v, rx, ry) in &fracs {
                let x = PolarPoint::new(rx, u * a);
                let y = PolarPoint::new(ry, v * a);
                let res = mehler_check(&sys, &x, &y, 0.3, 80, &ctl()).unwrap();
                assert!(res < 1e-8, "n={} x={x:?} y={y:?}: {res}", sys.n);
            }
        }
    }

    #[test]
    fn mehler_small_r_and_origin() {
        for sys in systems() {
            let x = PolarPoint::new(0.7, 0.3 * sys.chamber_angle);
            let y = PolarPoint::new(1.2, 0.8 * sys.chamber_angle);
            assert!(mehler_check(&sys, &x, &y, 1e-4, 20, &ctl()).unwrap() < 1e-10);
            let origin = PolarPoint::new(0.0, 0.0);
            assert!(mehler_check(&sys, &origin, &y, 0.3, 80, &ctl()).unwrap() < 1e-9);
            // at the origin only the j = 0 tower contributes
            for q in 0..4 {
                assert_eq!(hermite_w(&sys, HermiteIndex::new(q, 1), &origin), 0.0);
            }
        }
    }

    #[test]
    fn mehler_rejects_bad_r() {
        let sys = make_system(4, 1.0, Some(0.5)).unwrap();
        let x = PolarPoint::new(0.5, 0.1);
        assert!(mehler_check(&sys, &x, &x, 1.0, 80, &ctl()).is_err());
        assert!(mehler_check(&sys, &x, &x, 0.0, 80, &ctl()).is_err());
        assert!(matches!(mehler_check(&sys, &x, &x, 0.95, 80, &ctl()), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn zero_index_value() {
        for sys in systems() {
            let g = sys.gamma;
            let v = hermite_w(&sys, HermiteIndex::new(0, 0), &PolarPoint::new(1.3, 0.1));
            // sqrt(1/Gamma(gamma+1)) pi_0 with pi_0 = |W| sqrt(Gamma(gamma+1))
            let pi0 = sys.group_order as f64 * (0.5 * lgamma(g + 1.0)).exp();
            assert!((v - (-0.5 * lgamma(g + 1.0)).exp() * pi0).abs() < 1e-12);
            assert!((v - sys.group_order as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_homogeneity_and_constant() {
        let sys = make_system(4, 0.6, Some(1.2)).unwrap();
        let x = PolarPoint::new(0.9, 0.4);
        let h0a = w_invariant_harmonic(&sys, 0, &x);
        let h0b = w_invariant_harmonic(&sys, 0, &PolarPoint::new(2.5, 0.1));
        assert!((h0a - h0b).abs() < 1e-12);
        let lhs = w_invariant_harmonic(&sys, 2, &PolarPoint::new(1.8, 0.4));
        let rhs = 2f64.powi(8) * w_invariant_harmonic(&sys, 2, &PolarPoint::new(0.9, 0.4));
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
    }

    #[test]
    fn harmonic_at_zero_multiplicity_is_harmonic() {
        let sys = make_system(4, 0.0, Some(0.0)).unwrap();
        let h = |x: f64, y: f64| {
            let r = x.hypot(y);
            w_invariant_harmonic(&sys, 1, &PolarPoint::new(r, y.atan2(x)))
        };
        let step = 1e-4;
        for i in 0..5 {
            for k in 0..5 {
                let r = 0.5 + 0.2 * i as f64;
                let th = (0.1 + 0.15 * k as f64) * sys.chamber_angle;
                let (x, y) = (r * th.cos(), r * th.sin());
                let lap =
                    (h(x + step, y) + h(x - step, y) + h(x, y + step) + h(x, y - step) - 4.0 * h(x, y)) / (step * step);
                let scale = h(x, y).abs().max(1.0);
                assert!(lap.abs() < 1e-5 * scale, "lap={lap} at ({r}, {th})");
            }
        }
        // and it is a multiple of rho^4 cos 4 phi
        let a = w_invariant_harmonic(&sys, 1, &PolarPoint::new(1.0, 0.0));
        let b = w_invariant_harmonic(&sys, 1, &PolarPoint::new(1.3, 0.2));
        assert!((b - a * 1.3f64.powi(4) * (0.8f64).cos()).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn leading_coefficient_signs() {
        // symbolic oracle: the top rho-power coefficient of H_{q,j} is
        // sqrt(q!/Gamma(q+nu+1)) (-1)^q / (q! 2^q) 2^{-jh} pi_j(phi)
        let sys = make_system(4, 1.0, Some(0.5)).unwrap();
        let f = sys.frame();
        let phi = 0.05;
        for q in 0..=5 {
            for j in 0..=5 {
                let idx = HermiteIndex::new(q, j);
                let deg = idx.total_degree(&sys);
                let nu = f.bessel_index(j);
                let qf = q as f64;
                let want = (0.5 * (lgamma(qf + 1.0) - lgamma(qf + nu + 1.0)) - lgamma(qf + 1.0)).exp()
                    * 2f64.powf(-qf - j as f64 * f.h)
                    * if q % 2 == 0 { 1.0 } else { -1.0 }
                    * angular_factor(&sys, j, phi);
                let rho = 1e4;
                let got = hermite_w(&sys, idx, &PolarPoint::new(rho, phi)) / rho.powf(deg);
                assert!(((got - want) / want).abs() < 1e-5, "q={q} j={j}");
                // the Laguerre part alone has its leading sign (-1)^q; the rest is positive at phi near 0
                assert!(got * if q % 2 == 0 { 1.0 } else { -1.0 } > 0.0);
            }
        }
    }

    #[test]
    fn heat_image_examples() {
        let sys = make_system(4, 1.0, Some(0.5)).unwrap();
        let x = PolarPoint::new(1.4, 0.3);
        let p0 = w_invariant_harmonic(&sys, 0, &x);
        assert!((heat_image(&sys, 0, 0, &x) - p0).abs() < 1e-12);
        // q = 1: -2 L_1^nu(rho^2/2) h_j = (rho^2 - 2(nu+1)) h_j
        for j in 0..4 {
            let nu = sys.frame().bessel_index(j);
            let want = (x.r * x.r - 2.0 * (nu + 1.0)) * w_invariant_harmonic(&sys, j, &x);
            let got = heat_image(&sys, 1, j, &x);
            assert!((got - want).abs() < 1e-10 * want.abs(), "j={j}");
        }
    }

    #[test]
    fn heat_image_ratio_is_constant() {
        let sys = make_system(6, 0.4, Some(1.1)).unwrap();
        let pts = [(0.3, 0.1), (0.9, 0.2), (1.6, 0.05), (2.4, 0.45), (3.1, 0.33)];
        for q in 0..5 {
            for j in 0..4 {
                let idx = HermiteIndex::new(q, j);
                let ratios: Vec<f64> = pts
                    .iter()
                    .map(|&(r, u)| {
                        let x = PolarPoint::new(r, u * sys.chamber_angle);
                        heat_image(&sys, q, j, &x) / hermite_w(&sys, idx, &x)
                    })
                    .collect();
                for r in &ratios {
                    assert!(((r - ratios[0]) / ratios[0]).abs() < 1e-9, "q={q} j={j}: {ratios:?}");
                }
            }
        }
    }

    #[test]
    fn lattice_is_sorted_and_complete() {
        let sys = make_system(3, 0.5, None).unwrap();
        let l = lattice(&sys, 12);
        assert!(l.windows(2).all(|w| w[0].total_degree(&sys) <= w[1].total_degree(&sys)));
        // j n <= 12 with n = 3: j in 0..=4; q <= (12 - 3j)/2
        let count: usize = (0..=4).map(|j| (12 - 3 * j) / 2 + 1).sum();
        assert_eq!(l.len(), count);
    }

    proptest! {
        #[test]
        fn factorizes(q in 0usize..6, j in 0usize..5, r1 in 0.1f64..3.0, r2 in 0.1f64..3.0, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
            let sys = make_system(4, 0.8, Some(0.3)).unwrap();
            let a = sys.chamber_angle;
            let idx = HermiteIndex::new(q, j);
            let h = |r: f64, u: f64| hermite_w(&sys, idx, &PolarPoint::new(r, u * a));
            let lhs = h(r1, u1) * h(r2, u2);
            let rhs = h(r1, u2) * h(r2, u1);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1e-300));
        }
    }
}
