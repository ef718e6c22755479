//! Thin helpers over nalgebra shared by the verification modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `sigma_min < SINGULAR_FLOOR * sigma_max` counts as singular.
pub const SINGULAR_FLOOR: f64 = 1e-12;

pub fn ensure_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

/// Singular values, descending.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    let mut sv = a.clone().singular_values();
    sv.as_mut_slice()
        .sort_unstable_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().max()
}

/// `(sigma_max, sigma_min)`, failing when the matrix is numerically singular.
pub fn extreme_singular_values(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    ensure_square(a)?;
    let sv = singular_values(a);
    let max = sv[0];
    let min = sv[sv.len() - 1];
    if !(max > 0.0) || min < SINGULAR_FLOOR * max {
        return Err(Error::Singular {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok((max, min))
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    extreme_singular_values(a)?;
    a.clone().try_inverse().ok_or(Error::Singular { ratio: 0.0 })
}

pub fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm()).collect()
}

pub fn row_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.row_iter().map(|r| r.norm()).collect()
}

/// `max |a_ij - b_ij|`
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
