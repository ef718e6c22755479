//! Boundedness and stability checks for arbitrary ordered systems.
//!
//! For a system with vector matrix `A` and Gram matrix `B = A^T A`,
//! `|x_i|^2 = B_ii` and `|x_i^*|^2 = (B^{-1})_ii`; the dual functionals are
//! the rows of `A^{-1}`. The stability chain for normalized systems
//! (`|x_i^*| = 1`, `|x_i| <= 1 + eps_i`) bounds the distance to the
//! orthonormal basis by `3C + 2` with `C = sum eps_i`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blockbasis::OrderedSystem;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Identities such as `trace(B^{-1}) = n`.
    pub identity: f64,
    /// Inequalities carrying accumulated SVD error.
    pub inequality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            inequality: 1e-8,
        }
    }
}

/// Rescales each vector by its dual norm (`y_i = |x_i^*| x_i`) so every
/// dual functional has norm one.
pub fn normalize_system(system: &OrderedSystem) -> Result<OrderedSystem> {
    let inv = linalg::inverse(system.matrix())?;
    let dual = linalg::row_norms(&inv);
    let mut a = system.matrix().clone();
    for (mut col, d) in a.column_iter_mut().zip(dual) {
        col *= d;
    }
    OrderedSystem::new(a)?.with_labels(system.labels().to_vec())
}

/// Rescales each vector to unit norm, dividing the functional by the same factor.
pub fn unit_vectors(system: &OrderedSystem) -> Result<OrderedSystem> {
    let mut a = system.matrix().clone();
    for mut col in a.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::Singular { ratio: 0.0 });
        }
        col /= n;
    }
    OrderedSystem::new(a)?.with_labels(system.labels().to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub vector_norms: Vec<f64>,
    pub dual_norms: Vec<f64>,
    /// `|x_i| |x_i^*| = sqrt(B_ii (B^{-1})_ii)`
    pub products: Vec<f64>,
    pub budgets: Vec<f64>,
    pub passed: Vec<bool>,
    pub worst_index: usize,
    /// `max_i products_i / budgets_i`
    pub worst_ratio: f64,
    pub all_pass: bool,
}

/// Checks `|x_i| |x_i^*| <= (1 + eps_i)(1 + tol)`.
pub fn bound_products(system: &OrderedSystem, eps: &[f64], tol: f64) -> Result<BoundednessReport> {
    if eps.len() != system.dim() {
        return Err(Error::LengthMismatch {
            expected: system.dim(),
            got: eps.len(),
        });
    }
    let inv = linalg::inverse(system.matrix())?;
    let vector_norms = linalg::column_norms(system.matrix());
    let dual_norms = linalg::row_norms(&inv);
    let products: Vec<f64> = vector_norms.iter().zip(&dual_norms).map(|(x, y)| x * y).collect();
    let budgets: Vec<f64> = eps.iter().map(|e| 1.0 + e).collect();
    let passed: Vec<bool> = products
        .iter()
        .zip(&budgets)
        .map(|(p, b)| *p <= b * (1.0 + tol))
        .collect();
    let (worst_index, worst_ratio) =
        products
            .iter()
            .zip(&budgets)
            .map(|(p, b)| p / b)
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, r)| if r > acc.1 { (i, r) } else { acc },
            );
    Ok(BoundednessReport {
        all_pass: passed.iter().all(|&p| p),
        vector_norms,
        dual_norms,
        products,
        budgets,
        passed,
        worst_index: worst_index + 1,
        worst_ratio,
    })
}

/// `|A| |A^{-1}| = sigma_max / sigma_min`.
pub fn riesz_distance(system: &OrderedSystem) -> Result<f64> {
    let (max, min) = linalg::extreme_singular_values(system.matrix())?;
    Ok(max / min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Certificate {
    pub n: usize,
    /// `C = sum eps_i` over the verified range.
    pub c: f64,
    pub trace_b: f64,
    pub trace_binv: f64,
    /// `sum_j (sqrt(d_j) - 1/sqrt(d_j))^2`, from the singular values.
    pub defect: f64,
    /// `|defect - (trace_b + trace_binv - 2n)|`
    pub identity_residual: f64,
    /// Larger root `R` of `(x - 1/x)^2 = 3C`.
    pub root: f64,
    /// `3C + 2`
    pub bound: f64,
    pub distance: f64,
    pub distance_over_bound: f64,
    pub trace_b_ok: bool,
    pub trace_binv_ok: bool,
    pub defect_ok: bool,
    pub root_ok: bool,
    pub distance_ok: bool,
    pub passed: bool,
}

/// Larger positive root of `(x - 1/x)^2 = 3c`.
pub fn stability_root(c: f64) -> f64 {
    let q = (3.0 * c).sqrt();
    (q + (3.0 * c + 4.0).sqrt()) / 2.0
}

/// Verifies the stability chain on a normalized, `(1 + eps_i)`-bounded system:
/// `trace(B) <= n + 3C`, `trace(B^{-1}) = n`, defect `<= 3C`, and
/// distance `<= R^2 < 3C + 2`.
pub fn theorem1_verify(system: &OrderedSystem, eps: &[f64], tol: Tolerances) -> Result<Theorem1Certificate> {
    let n = system.dim();
    let bounded = bound_products(system, eps, tol.identity)?;
    if let Some(i) = bounded.dual_norms.iter().position(|d| (d - 1.0).abs() > tol.identity) {
        return Err(Error::Precondition(format!(
            "system is not normalized: |x_{}^*| = {} (run normalize_system first)",
            i + 1,
            bounded.dual_norms[i]
        )));
    }
    if !bounded.all_pass {
        return Err(Error::Precondition(format!(
            "system is not (1 + eps_i)-bounded: index {} has |x||x^*| = {} > {}",
            bounded.worst_index,
            bounded.products[bounded.worst_index - 1],
            bounded.budgets[bounded.worst_index - 1]
        )));
    }

    let c: f64 = eps.iter().sum();
    let trace_b: f64 = bounded.vector_norms.iter().map(|x| x * x).sum();
    let trace_binv: f64 = bounded.dual_norms.iter().map(|x| x * x).sum();
    let sv = linalg::singular_values(system.matrix());
    let defect: f64 = sv.iter().map(|s| (s - 1.0 / s).powi(2)).sum();
    let identity_residual = (defect - (trace_b + trace_binv - 2.0 * n as f64)).abs();
    let distance = sv[0] / sv[n - 1];
    let root = stability_root(c);
    let bound = 3.0 * c + 2.0;
    let nf = n as f64;

    let trace_b_ok = trace_b <= nf + 3.0 * c + tol.inequality;
    let trace_binv_ok = (trace_binv - nf).abs() <= tol.inequality;
    let defect_ok = defect <= 3.0 * c + tol.inequality;
    let root_ok = distance <= root * root + tol.inequality;
    let distance_ok = distance <= bound + tol.inequality;
    Ok(Theorem1Certificate {
        n,
        c,
        trace_b,
        trace_binv,
        defect,
        identity_residual,
        root,
        bound,
        distance,
        distance_over_bound: distance / bound,
        trace_b_ok,
        trace_binv_ok,
        defect_ok,
        root_ok,
        distance_ok,
        passed: trace_b_ok && trace_binv_ok && defect_ok && root_ok && distance_ok,
    })
}

/// Gram matrix of the dual system, `B^{-1}`.
pub fn dual_gram(system: &OrderedSystem) -> Result<DMatrix<f64>> {
    let inv = linalg::inverse(system.matrix())?;
    Ok(&inv * inv.transpose())
}
