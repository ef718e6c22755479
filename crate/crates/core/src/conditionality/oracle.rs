//! Exact basis constants at small dimension.
//!
//! For a system with columns `a_1..a_n` of an invertible `A`, the prefix
//! projection onto `span{a_1..a_k}` along the remaining vectors is
//! `P_k = A E_k A^{-1} = sum_{j<=k} a_j (A^{-1})_{j,.}`. The largest ratio
//! `|sum_{j<=k} c_j a_j| / |sum_j c_j a_j|` over coefficients is `|P_k|`, so
//! the basis constant is `max_k |P_k|`.

use nalgebra::DMatrix;

use crate::blockbasis::OrderedSystem;
use crate::error::{Error, Result};
use crate::linalg::{inverse, spectral_norm};
use crate::search::{minimize, ordering_cost, PrefixObjective, SearchOptions, SearchOutcome};

use super::validate_ordering;

/// Largest dimension for exact prefix-projection norms.
pub const BASIS_CONSTANT_CAP: usize = 64;

/// Prefix projections of a fixed system; items are column indices.
pub struct ProjectionObjective {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
}

impl ProjectionObjective {
    pub fn new(system: &OrderedSystem) -> Result<Self> {
        let n = system.dim();
        if n > BASIS_CONSTANT_CAP {
            return Err(Error::TooLarge {
                dim: n,
                cap: BASIS_CONSTANT_CAP,
                hint: "exact basis constants need dense SVDs of every prefix projection",
            });
        }
        let a = system.matrix().clone();
        let a_inv = inverse(&a)?;
        Ok(Self { a, a_inv })
    }
}

impl PrefixObjective for ProjectionObjective {
    type State = DMatrix<f64>;

    fn size(&self) -> usize {
        self.a.ncols()
    }

    fn empty(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.a.nrows(), self.a.nrows())
    }

    fn push(&self, state: &mut DMatrix<f64>, item: usize) {
        state.ger(1.0, &self.a.column(item), &self.a_inv.row(item).transpose(), 1.0);
    }

    fn cost(&self, state: &DMatrix<f64>) -> f64 {
        spectral_norm(state)
    }
}

/// `max_k |P_k|` in the system's own order. The full prefix is the identity,
/// so a one-dimensional system has constant 1.
pub fn basis_constant_exact(system: &OrderedSystem) -> Result<f64> {
    let obj = ProjectionObjective::new(system)?;
    let order: Vec<usize> = (0..system.dim()).collect();
    Ok(ordering_cost(&obj, &order))
}

/// Minimum of [`basis_constant_exact`] over column orderings. Exact up to
/// `options.exhaustive_cap` columns, an upper bound (flagged) beyond.
pub fn best_permutation_constant(system: &OrderedSystem, options: &SearchOptions) -> Result<SearchOutcome> {
    let obj = ProjectionObjective::new(system)?;
    Ok(minimize(&obj, options))
}

/// `|sum_j signs_j a_{order_j}|^2` from the explicit vectors; `order` is
/// 0-based and `signs` covers its first positions.
pub fn explicit_partial_sum_norm_sq(system: &OrderedSystem, order: &[usize], signs: &[i8]) -> Result<f64> {
    validate_ordering(order, system.dim())?;
    if signs.is_empty() || signs.len() > order.len() {
        return Err(Error::LengthMismatch {
            expected: order.len(),
            got: signs.len(),
        });
    }
    let a = system.matrix();
    let mut v = nalgebra::DVector::zeros(a.nrows());
    for (&k, &d) in order.iter().zip(signs) {
        v.axpy(f64::from(d), &a.column(k), 1.0);
    }
    Ok(v.norm_squared())
}
