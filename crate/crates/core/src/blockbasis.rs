//! Finite-dimensional blocks of the almost-Auerbach construction.
//!
//! A block owns a slice `eps_1..eps_n` with mass `s = sum eps_i >= 1`. Its
//! basis vectors are the columns of `A = sqrt(D) U^T`, where `U` is
//! orthogonal with first column `v = sqrt(eps) / sqrt(s)` and
//! `D = diag(s, 1, ..., 1)`. The Gram matrix `B = A^T A = U D U^T` then has
//! the closed form
//!
//! ```text
//! B_ij = (s - 1)/s * sqrt(eps_i eps_j) + [i == j]
//! ```
//!
//! which is what every large-block computation uses; `U` and `A` are only
//! materialized on request and up to [`MATERIALIZE_CAP`].

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seqplan::{BlockSpan, CompensatedSum, EpsilonSequence};

pub const MATERIALIZE_CAP: usize = 4096;

const UNIT_TOL: f64 = 1e-10;

/// Orthogonal `Q` with `Q e_1 = v`.
///
/// For `v_1 >= 0` this is the reflection `2 w w^T - I` across the line
/// through `w = (e_1 + v) / |e_1 + v|`; it is symmetric and fixes the
/// bisector of `e_1` and `v`. For `v_1 < 0` the Householder reflector
/// `I - 2 w w^T` with `w = (e_1 - v) / |e_1 - v|` is used instead, which is
/// better conditioned there.
pub fn orthogonal_with_first_column(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = v.len();
    if n == 0 {
        return Err(Error::NonUnitVector { norm: 0.0 });
    }
    let norm = v.norm();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::NonUnitVector { norm });
    }
    let mut w = v.clone();
    let (sign, scale) = if v[0] >= 0.0 {
        w[0] += 1.0;
        (1.0, -1.0)
    } else {
        w.neg_mut();
        w[0] += 1.0;
        (-1.0, 1.0)
    };
    let w_norm = w.norm();
    w /= w_norm;
    // sign * (2 w w^T) + scale * I
    let mut q = &w * w.transpose() * (2.0 * sign);
    for i in 0..n {
        q[(i, i)] += scale;
    }
    Ok(q)
}

/// One block of the construction.
#[derive(Clone, Debug)]
pub struct MBasisBlock {
    offset: usize,
    eps: Vec<f64>,
    sqrt_eps: Vec<f64>,
    mass: f64,
    u: Option<DMatrix<f64>>,
}

/// Builds the block for `eps_slice`, which must have mass at least 1.
pub fn build_block(eps_slice: &[f64]) -> Result<MBasisBlock> {
    MBasisBlock::new(0, eps_slice.to_vec())
}

impl MBasisBlock {
    /// `offset` is the global index preceding the block (`n_{m-1}`); it only
    /// affects reported indices.
    pub fn new(offset: usize, eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::Precondition("empty epsilon slice".into()));
        }
        let mut mass = CompensatedSum::default();
        for (k, &e) in eps.iter().enumerate() {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Domain {
                    index: offset + k + 1,
                    value: e,
                });
            }
            mass.add(e);
        }
        let mass = mass.value();
        if mass < 1.0 {
            return Err(Error::Precondition(format!(
                "block mass {mass} is below 1; the first diagonal entry must dominate"
            )));
        }
        let sqrt_eps = eps.iter().map(|e| e.sqrt()).collect();
        Ok(Self {
            offset,
            eps,
            sqrt_eps,
            mass,
            u: None,
        })
    }

    pub fn from_span(eps: &EpsilonSequence, span: &BlockSpan) -> Result<Self> {
        Self::new(span.start - 1, eps.slice(span.start - 1, span.end)?)
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn sqrt_eps(&self) -> &[f64] {
        &self.sqrt_eps
    }

    /// `s = r^2`
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `(s - 1) / s`, the weight of the rank-one part of the Gram matrix.
    pub fn rank_one_weight(&self) -> f64 {
        (self.mass - 1.0) / self.mass
    }

    /// Distance to the orthonormal basis, `sqrt(d_1 / d_n) = sqrt(s)`.
    pub fn distance(&self) -> f64 {
        self.mass.sqrt()
    }

    /// `v = sqrt(eps) / sqrt(s)`
    pub fn first_column(&self) -> DVector<f64> {
        let r = self.mass.sqrt();
        DVector::from_iterator(self.dim(), self.sqrt_eps.iter().map(|x| x / r))
    }

    /// `D = diag(s, 1, ..., 1)`
    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::from_element(self.dim(), 1.0);
        d[0] = self.mass;
        d
    }

    pub fn is_materialized(&self) -> bool {
        self.u.is_some()
    }

    pub fn materialize(&mut self) -> Result<()> {
        if self.u.is_none() {
            check_cap(self.dim())?;
            self.u = Some(orthogonal_with_first_column(&self.first_column())?);
        }
        Ok(())
    }

    pub fn materialized(mut self) -> Result<Self> {
        self.materialize()?;
        Ok(self)
    }

    /// The orthogonal factor, if materialized.
    pub fn u(&self) -> Option<&DMatrix<f64>> {
        self.u.as_ref()
    }

    fn check_index(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.dim() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.dim(),
            });
        }
        Ok(i - 1)
    }

    /// `B_ij` from the closed form, 1-based local indices.
    pub fn gram(&self, i: usize, j: usize) -> Result<f64> {
        let (a, b) = (self.check_index(i)?, self.check_index(j)?);
        Ok(self.gram_unchecked(a, b))
    }

    pub(crate) fn gram_unchecked(&self, a: usize, b: usize) -> f64 {
        if a == b {
            self.rank_one_weight() * self.eps[a] + 1.0
        } else {
            self.rank_one_weight() * (self.eps[a] * self.eps[b]).sqrt()
        }
    }

    /// `(B^{-1})_ij = [i == j] - (s - 1)/s^2 * sqrt(eps_i eps_j)`
    pub fn gram_inverse(&self, i: usize, j: usize) -> Result<f64> {
        let (a, b) = (self.check_index(i)?, self.check_index(j)?);
        let root = if a == b {
            self.eps[a]
        } else {
            (self.eps[a] * self.eps[b]).sqrt()
        };
        let off = (self.mass - 1.0) / (self.mass * self.mass) * root;
        Ok(if a == b { 1.0 - off } else { -off })
    }

    /// Full closed-form Gram matrix.
    pub fn gram_matrix(&self) -> Result<DMatrix<f64>> {
        check_cap(self.dim())?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |a, b| self.gram_unchecked(a, b)))
    }

    pub fn to_record(&self) -> Result<BlockRecord> {
        let a = match self.u {
            Some(_) => Some(block_vectors(self)?.matrix().transpose().iter().copied().collect()),
            None => None,
        };
        Ok(BlockRecord {
            dim: self.dim(),
            offset: self.offset,
            eps_slice: self.eps.clone(),
            s: self.mass,
            materialized: self.u.is_some(),
            a,
        })
    }

    pub fn from_record(record: &BlockRecord) -> Result<Self> {
        if record.eps_slice.len() != record.dim {
            return Err(Error::LengthMismatch {
                expected: record.dim,
                got: record.eps_slice.len(),
            });
        }
        let mut block = Self::new(record.offset, record.eps_slice.clone())?;
        if record.materialized {
            block.materialize()?;
        }
        Ok(block)
    }
}

fn check_cap(dim: usize) -> Result<()> {
    if dim > MATERIALIZE_CAP {
        return Err(Error::TooLarge {
            dim,
            cap: MATERIALIZE_CAP,
            hint: "use the closed-form Gram entries instead of explicit matrices",
        });
    }
    Ok(())
}

/// `B_ij` of a block, closed form.
pub fn block_gram(block: &MBasisBlock, i: usize, j: usize) -> Result<f64> {
    block.gram(i, j)
}

/// JSON form of a block. `a` is row-major and present only when the block
/// was materialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub dim: usize,
    #[serde(default)]
    pub offset: usize,
    pub eps_slice: Vec<f64>,
    pub s: f64,
    pub materialized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "A")]
    pub a: Option<Vec<f64>>,
}

/// A square invertible matrix whose columns are basis vectors in a fixed
/// order. `labels[k]` is the original index (1-based) of column `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedSystem {
    matrix: DMatrix<f64>,
    labels: Vec<usize>,
}

impl OrderedSystem {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = linalg::ensure_square(&matrix)?;
        Ok(Self {
            matrix,
            labels: (1..=n).collect(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("square")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.matrix.transpose() * &self.matrix
    }

    /// Columns rearranged so that new column `k` is old column `order[k]`
    /// (0-based positions).
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let n = self.dim();
        crate::conditionality::validate_ordering(order, n)?;
        let matrix = DMatrix::from_fn(n, n, |i, k| self.matrix[(i, order[k])]);
        let labels = order.iter().map(|&k| self.labels[k]).collect();
        Ok(Self { matrix, labels })
    }

    /// `Q A` for an orthogonal (or arbitrary) left factor.
    pub fn left_multiplied(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.ncols() != self.dim() || q.nrows() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: q.nrows(),
            });
        }
        Ok(Self {
            matrix: q * &self.matrix,
            labels: self.labels.clone(),
        })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SystemFile {
    Rows { rows: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

/// Loads a row-major matrix from `.json` (`{"rows": [[..]]}` or a bare
/// array of rows) or from CSV (one matrix row per line, no header).
pub fn load_system(path: impl AsRef<Path>) -> Result<OrderedSystem> {
    let path = path.as_ref();
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let rows = if is_json {
        match serde_json::from_str::<SystemFile>(&std::fs::read_to_string(path)?)? {
            SystemFile::Rows { rows } | SystemFile::Bare(rows) => rows,
        }
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::config(format!("system csv row {}", rows.len() + 1), e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        rows
    };
    OrderedSystem::from_rows(&rows)
}

/// Explicit vectors of a block: `A = sqrt(D) U^T`, columns are `x_1..x_n`.
pub fn block_vectors(block: &MBasisBlock) -> Result<OrderedSystem> {
    check_cap(block.dim())?;
    let owned;
    let u = match block.u() {
        Some(u) => u,
        None => {
            owned = orthogonal_with_first_column(&block.first_column())?;
            &owned
        }
    };
    let d = block.diagonal();
    let n = block.dim();
    let a = DMatrix::from_fn(n, n, |k, j| d[k].sqrt() * u[(j, k)]);
    let mut system = OrderedSystem::new(a)?;
    system.labels = (block.offset + 1..=block.offset + n).collect();
    Ok(system)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticEntry {
    /// Global index.
    pub index: usize,
    pub eps: f64,
    /// `|x_i|^2`
    pub b_ii: f64,
    /// `|x_i^*|^2`
    pub binv_ii: f64,
    /// `b_ii * binv_ii`
    pub product: f64,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub dim: usize,
    pub mass: f64,
    pub distance: f64,
    pub entries: Vec<DiagnosticEntry>,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Closed-form per-index quantities and the containment checks
/// `b_ii in [1, 1 + eps_i]`, `(B^{-1})_ii in (1 - eps_i/s, 1]` and
/// `b_ii (B^{-1})_ii <= 1 + eps_i`, strict where `eps_i > 0` (and `s > 1`
/// for the lower bound on `b_ii`).
///
/// The checks are evaluated on the excesses over 1, e.g.
/// `b_ii - 1 = eps_i (s - 1)/s`, so strictness survives rounding for tiny
/// `eps_i`.
pub fn block_diagnostics(block: &MBasisBlock) -> BlockDiagnostics {
    let s = block.mass();
    let w = block.rank_one_weight();
    let mut failures = Vec::new();
    let mut entries = Vec::with_capacity(block.dim());
    for (k, &e) in block.eps().iter().enumerate() {
        let index = block.offset() + k + 1;
        let b_excess = e * w;
        let binv_deficit = e * w / s;
        // (1 + x)(1 - y) - 1
        let product_excess = b_excess - binv_deficit - b_excess * binv_deficit;
        let b_ii = 1.0 + b_excess;
        let binv_ii = 1.0 - binv_deficit;
        let product = 1.0 + product_excess;

        let positive = e > 0.0;
        if b_excess < 0.0 || b_excess > e || (positive && s > 1.0 && b_excess <= 0.0) {
            failures.push(format!("index {index}: b_ii = {b_ii} outside [1, 1 + {e}]"));
        }
        if binv_deficit < 0.0 || binv_deficit > e / s || (positive && binv_deficit >= e / s) {
            failures.push(format!("index {index}: (B^-1)_ii = {binv_ii} outside (1 - eps/s, 1]"));
        }
        if product_excess > e || (positive && product_excess >= e) {
            failures.push(format!("index {index}: b_ii (B^-1)_ii = {product} not below 1 + {e}"));
        }
        entries.push(DiagnosticEntry {
            index,
            eps: e,
            b_ii,
            binv_ii,
            product,
            budget: 1.0 + e,
        });
    }
    BlockDiagnostics {
        dim: block.dim(),
        mass: s,
        distance: block.distance(),
        passed: failures.is_empty(),
        entries,
        failures,
    }
}
