//! Gauss rules and an adaptive integrator.
//!
//! Jacobi rules come from the Golub-Welsch eigenproblem; weights are then
//! recomputed from the Christoffel function, which keeps small weights accurate.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::specfun::{jacobi_standard, OrthoJacobi, PolyParams};

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Affine map of a Legendre rule to [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let s: f64 = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mid + half * x)).sum();
        s * half
    }
}

type Key = (usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<Key, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// n-point rule for (1-x)^alpha (1+x)^beta on [-1, 1].
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Arc<GaussRule> {
    let key = (n, alpha.to_bits(), beta.to_bits());
    if let Some(rule) = cache().lock().unwrap().get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(build_jacobi(n, alpha, beta));
    cache().lock().unwrap().entry(key).or_insert(rule).clone()
}

pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

fn build_jacobi(n: usize, alpha: f64, beta: f64) -> GaussRule {
    assert!(n >= 1);
    let params = PolyParams { a: alpha, b: beta };
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (a_i, _) = params.monic_coeffs(i);
        m[(i, i)] = a_i;
        if i + 1 < n {
            let (_, b) = params.monic_coeffs(i + 1);
            m[(i, i + 1)] = b.sqrt();
            m[(i + 1, i)] = b.sqrt();
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Newton polish on the standard P_n, using P_n' = (n+a+b+1)/2 P_{n-1}^{(a+1,b+1)}
    let shifted = PolyParams { a: alpha + 1.0, b: beta + 1.0 };
    let slope = 0.5 * (n as f64 + alpha + beta + 1.0);
    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let d = slope * jacobi_standard(n - 1, shifted, *x);
            if d != 0.0 {
                *x -= jacobi_standard(n, params, *x) / d;
            }
        }
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let s: f64 = OrthoJacobi::new(params, x).take(n).map(|p| p * p).sum();
            1.0 / s
        })
        .collect();
    GaussRule { nodes, weights }
}

/// Adaptive Gauss-Legendre on [a, b]: a panel is accepted when its 20-point
/// value agrees with the sum over its two halves to `rel_tol * |total| + abs_tol`.
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let rule = gauss_legendre(20);
    let whole = rule.integrate(a, b, f);
    refine(f, &rule, a, b, whole, rel_tol, abs_tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    rule: &GaussRule,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    abs_tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let both = left + right;
    if (both - whole).abs() <= rel_tol * both.abs() + abs_tol || depth >= 40 {
        return both;
    }
    refine(f, rule, a, m, left, rel_tol, 0.5 * abs_tol, depth + 1)
        + refine(f, rule, m, b, right, rel_tol, 0.5 * abs_tol, depth + 1)
}

/// Sum of adaptive integrals over consecutive panels given by `breaks`.
pub fn adaptive_panels(f: &impl Fn(f64) -> f64, breaks: &[f64], rel_tol: f64, abs_tol: f64) -> f64 {
    breaks.windows(2).map(|w| adaptive(f, w[0], w[1], rel_tol, abs_tol)).sum()
}
