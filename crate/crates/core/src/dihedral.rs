//! The dihedral root system I2(n): multiplicities, exponents and chamber geometry.
//!
//! The chamber is the wedge 0 <= theta <= pi/n. Multiplicity `k0` sits on the
//! wall theta = 0 (the sine factor of the weight), `k1` on the wall theta = pi/n.
//! For odd n every reflection is conjugate and `k1` is absent.
//!
//! Spectral code does not work with `p` directly. It uses [`AngularFrame`]:
//! half the polygon order h = n/2 together with wall multiplicities (m0, m1),
//! which equal (k0, k1) for even n and (k, k) for odd n. With this frame the
//! angular eigenfunctions are Jacobi polynomials in cos(2h theta) for either
//! parity and the Bessel indices are nj + gamma.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::PolyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DihedralSystem {
    pub n: u32,
    pub parity: Parity,
    pub p: u32,
    pub k0: f64,
    pub k1: f64,
    pub gamma: f64,
    pub l0: f64,
    pub l1: f64,
    pub group_order: u32,
    pub chamber_angle: f64,
}

/// Parity-free parameterization used by the spectral formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularFrame {
    pub h: f64,
    pub m0: f64,
    pub m1: f64,
}

impl AngularFrame {
    pub fn l0(&self) -> f64 {
        self.m0 - 0.5
    }

    pub fn l1(&self) -> f64 {
        self.m1 - 0.5
    }

    pub fn gamma(&self) -> f64 {
        self.h * (self.m0 + self.m1)
    }

    /// Jacobi exponents (a, b) = (l0, l1) for the variable x = cos(2h theta).
    pub fn jacobi_params(&self) -> PolyParams {
        PolyParams { a: self.l0(), b: self.l1() }
    }

    /// Bessel index of the j-th angular mode.
    pub fn bessel_index(&self, j: usize) -> f64 {
        2.0 * j as f64 * self.h + self.gamma()
    }

    /// sin^{2 m0}(h theta) cos^{2 m1}(h theta).
    pub fn angular_weight(&self, theta: f64) -> f64 {
        let a = self.h * theta;
        a.sin().max(0.0).powf(2.0 * self.m0) * a.cos().max(0.0).powf(2.0 * self.m1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        PolarPoint { r, theta }
    }

    pub fn cartesian(&self) -> (f64, f64) {
        (self.r * self.theta.cos(), self.r * self.theta.sin())
    }
}

/// JSON descriptor `{"n": int, "k0": float, "k1": float?}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub n: u32,
    pub k0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
}

impl TryFrom<SystemDescriptor> for DihedralSystem {
    type Error = Error;

    fn try_from(d: SystemDescriptor) -> Result<Self> {
        make_system(d.n, d.k0, d.k1)
    }
}

pub fn make_system(n: u32, k0: f64, k1: Option<f64>) -> Result<DihedralSystem> {
    if n < 3 {
        return domain(format!("polygon order must be >= 3, got {n}"));
    }
    let even = n.is_multiple_of(2);
    let k1 = match (even, k1) {
        (true, Some(k1)) => k1,
        (true, None) => return Err(Error::Parity(format!("n = {n} is even and needs k1"))),
        (false, Some(_)) => return Err(Error::Parity(format!("n = {n} is odd; k1 must not be given"))),
        (false, None) => 0.0,
    };
    if !(k0 >= 0.0) || !(k1 >= 0.0) || !k0.is_finite() || !k1.is_finite() {
        return domain(format!("multiplicities must be finite and >= 0, got ({k0}, {k1})"));
    }
    let p = if even { n / 2 } else { n };
    let gamma = p as f64 * (k0 + k1);
    Ok(DihedralSystem {
        n,
        parity: if even { Parity::Even } else { Parity::Odd },
        p,
        k0,
        k1,
        gamma,
        l0: k0 - 0.5,
        l1: k1 - 0.5,
        group_order: 2 * n,
        chamber_angle: PI / n as f64,
    })
}

impl DihedralSystem {
    pub fn descriptor(&self) -> SystemDescriptor {
        SystemDescriptor { n: self.n, k0: self.k0, k1: (self.parity == Parity::Even).then_some(self.k1) }
    }

    pub fn frame(&self) -> AngularFrame {
        let h = 0.5 * self.n as f64;
        match self.parity {
            Parity::Even => AngularFrame { h, m0: self.k0, m1: self.k1 },
            Parity::Odd => AngularFrame { h, m0: self.k0, m1: self.k0 },
        }
    }

    /// Validated point of the closed chamber.
    pub fn point(&self, r: f64, theta: f64) -> Result<PolarPoint> {
        if !(r >= 0.0) || !r.is_finite() {
            return domain(format!("radius must be finite and >= 0, got {r}"));
        }
        if !(theta >= 0.0 && theta <= self.chamber_angle) {
            return domain(format!("angle {theta} outside the chamber [0, {}]", self.chamber_angle));
        }
        Ok(PolarPoint { r, theta })
    }

    pub fn contains(&self, x: &PolarPoint) -> bool {
        x.r >= 0.0 && x.theta >= 0.0 && x.theta <= self.chamber_angle
    }

    /// True when both multiplicities vanish (reflected planar Brownian motion).
    pub fn is_zero(&self) -> bool {
        let f = self.frame();
        f.m0 == 0.0 && f.m1 == 0.0
    }

    /// True when both multiplicities equal one.
    pub fn is_one(&self) -> bool {
        let f = self.frame();
        f.m0 == 1.0 && f.m1 == 1.0
    }

    /// System with multiplicities 1 - k, i.e. indices -l.
    pub fn dual(&self) -> Result<DihedralSystem> {
        let k1 = (self.parity == Parity::Even).then_some(1.0 - self.k1);
        make_system(self.n, 1.0 - self.k0, k1)
    }
}

/// omega_k(r, theta) = r^{p(k0+k1)} sin^{k0}(p theta) cos^{k1}(p theta), constant set to 1.
pub fn weight(sys: &DihedralSystem, x: &PolarPoint) -> f64 {
    let p = sys.p as f64;
    let a = p * x.theta;
    x.r.powf(sys.gamma) * a.sin().max(0.0).powf(sys.k0) * a.cos().max(0.0).powf(sys.k1)
}
