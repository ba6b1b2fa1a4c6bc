//! Classical orthogonal polynomials by three-term recurrence.

use serde::{Deserialize, Serialize};

use super::{lgamma, ln_beta};
use crate::error::{domain, Result};

/// Jacobi/Laguerre exponents. For Jacobi the weight is (1-x)^a (1+x)^b on [-1,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyParams {
    pub a: f64,
    pub b: f64,
}

impl PolyParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > -1.0) || !(b > -1.0) {
            return domain(format!("polynomial exponents must exceed -1, got ({a}, {b})"));
        }
        Ok(PolyParams { a, b })
    }

    /// ln of the weight mass 2^{a+b+1} B(a+1, b+1).
    pub fn ln_mass(&self) -> f64 {
        (self.a + self.b + 1.0) * std::f64::consts::LN_2 + ln_beta(self.a + 1.0, self.b + 1.0)
    }

    /// ln of the squared L2 norm of the standard P_n.
    pub fn ln_norm_sq(&self, n: usize) -> f64 {
        if n == 0 {
            return self.ln_mass();
        }
        let (a, b, n) = (self.a, self.b, n as f64);
        (a + b + 1.0) * std::f64::consts::LN_2 - (2.0 * n + a + b + 1.0).ln()
            + lgamma(n + a + 1.0)
            + lgamma(n + b + 1.0)
            - lgamma(n + a + b + 1.0)
            - lgamma(n + 1.0)
    }

    /// Monic recurrence coefficients (alpha_n, beta_n): p_{n+1} = (x - alpha_n) p_n - beta_n p_{n-1}.
    pub(crate) fn monic_coeffs(&self, n: usize) -> (f64, f64) {
        let (a, b) = (self.a, self.b);
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        let alpha = if n == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
        let beta = match n {
            0 => 0.0,
            1 => 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b)),
            _ => 4.0 * nf * (nf + a) * (nf + b) * (nf + a + b) / (s * s * (s + 1.0) * (s - 1.0)),
        };
        (alpha, beta)
    }
}

/// Successive orthonormal Jacobi values Phat_0(x), Phat_1(x), ...
#[derive(Debug, Clone)]
pub(crate) struct OrthoJacobi {
    params: PolyParams,
    x: f64,
    prev: f64,
    cur: f64,
    n: usize,
}

impl OrthoJacobi {
    pub(crate) fn new(params: PolyParams, x: f64) -> Self {
        let p0 = (-0.5 * params.ln_mass()).exp();
        OrthoJacobi { params, x, prev: 0.0, cur: p0, n: 0 }
    }
}

impl Iterator for OrthoJacobi {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.cur;
        let (alpha, beta) = self.params.monic_coeffs(self.n);
        let (_, beta_next) = self.params.monic_coeffs(self.n + 1);
        let next = ((self.x - alpha) * self.cur - beta.sqrt() * self.prev) / beta_next.sqrt();
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        Some(out)
    }
}

fn clamp_unit(x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + 1e-12) {
        return domain(format!("Jacobi argument must lie in [-1,1], got {x}"));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Standard P_j^{(a,b)}(x) without argument checks.
pub(crate) fn jacobi_standard(j: usize, params: PolyParams, x: f64) -> f64 {
    let (a, b) = (params.a, params.b);
    if j == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = (a + 1.0) + (a + b + 2.0) * (x - 1.0) * 0.5;
    for n in 2..=j {
        let n = n as f64;
        let s = 2.0 * n + a + b;
        let c0 = 2.0 * n * (n + a + b) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c2 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * s;
        let next = (c1 * cur - c2 * prev) / c0;
        prev = cur;
        cur = next;
    }
    cur
}

/// P_j^{(a,b)}(x); when `normalized`, scaled to unit L2 norm under (1-x)^a (1+x)^b.
pub fn jacobi_p(j: usize, params: PolyParams, x: f64, normalized: bool) -> Result<f64> {
    let x = clamp_unit(x)?;
    if normalized {
        Ok(OrthoJacobi::new(params, x).nth(j).unwrap_or(0.0))
    } else {
        Ok(jacobi_standard(j, params, x))
    }
}

/// Generalized Laguerre L_q^alpha(x).
pub fn laguerre_l(q: usize, alpha: f64, x: f64) -> Result<f64> {
    if !(alpha > -1.0) {
        return domain(format!("Laguerre parameter must exceed -1, got {alpha}"));
    }
    if !(x >= 0.0) {
        return domain(format!("Laguerre argument must be >= 0, got {x}"));
    }
    Ok(laguerre_unchecked(q, alpha, x))
}

pub(crate) fn laguerre_unchecked(q: usize, alpha: f64, x: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for n in 1..q {
        let n = n as f64;
        let next = ((2.0 * n + 1.0 + alpha - x) * cur - (n + alpha) * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Chebyshev polynomial of the first kind.
pub fn chebyshev_t(j: usize, x: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for _ in 1..j {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Chebyshev polynomial of the second kind.
pub fn chebyshev_u(j: usize, x: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    for _ in 1..j {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Constant c such that C_{2j}^{(k1,k0)}(x) = c * P_j^{(k0-1/2, k1-1/2)}(2x^2 - 1).
pub fn gen_gegenbauer_constant(j: usize, k1: f64, k0: f64) -> f64 {
    let j = j as f64;
    let ln = lgamma(k0 + k1 + j) - lgamma(k0 + k1) - lgamma(k1 + 0.5 + j) + lgamma(k1 + 0.5);
    if k0 + k1 == 0.0 {
        // (0)_j vanishes for j >= 1; the classical limit keeps only P_0
        return if j == 0.0 { 1.0 } else { 0.0 };
    }
    ln.exp()
}

/// Generalized Gegenbauer polynomial C_{2j}^{(k1,k0)}(x), orthogonal for |x|^{2k1} (1-x^2)^{k0-1/2}.
pub fn gen_gegenbauer(j: usize, k1: f64, k0: f64, x: f64) -> Result<f64> {
    let x = clamp_unit(x)?;
    let params = PolyParams::new(k0 - 0.5, k1 - 0.5)?;
    Ok(gen_gegenbauer_constant(j, k1, k0) * jacobi_standard(j, params, 2.0 * x * x - 1.0))
}
