//! The max-type renorming that turns a `(1 + eps_i)`-bounded system into an
//! Auerbach one, on a finite truncation:
//!
//! ```text
//! |||x||| = max(|x|, max_i |x_i^*(x)|)
//! ```
//!
//! With unit vectors `|x_i| = 1` and `|x_i^*| <= 1 + eps_i`, this satisfies
//! `|x| <= |||x||| <= (1 + max eps)|x|`, `|||x_j||| = 1` and
//! `|||x_j^*||| = 1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockbasis::OrderedSystem;
use crate::error::{Error, Result};
use crate::linalg;
use crate::verify::{bound_products, unit_vectors};

/// Slack for floating-point comparisons of norms.
pub const NORM_SLACK: f64 = 1e-12;

const CHUNK: usize = 1024;
const MAX_EXAMPLES: usize = 8;

#[derive(Clone, Debug)]
pub struct RenormedSpace {
    vectors: DMatrix<f64>,
    /// Rows are the `x_i^*` that define `|||.|||`.
    functionals: DMatrix<f64>,
    /// Rows are the functionals checked against `|||.|||`; equal to
    /// `functionals` unless deliberately corrupted.
    duals: DMatrix<f64>,
    eps: Vec<f64>,
}

impl RenormedSpace {
    /// Rescales the vectors to unit length and checks
    /// `|x_i^*| <= (1 + eps_i)(1 + tol)`.
    pub fn from_system(system: &OrderedSystem, eps: &[f64], tol: f64) -> Result<Self> {
        let unit = unit_vectors(system)?;
        let report = bound_products(&unit, eps, tol)?;
        if !report.all_pass {
            return Err(Error::Precondition(format!(
                "system is not (1 + eps_i)-bounded: |x_{0}| |x_{0}^*| = {1} exceeds {2}",
                report.worst_index,
                report.products[report.worst_index - 1],
                report.budgets[report.worst_index - 1],
            )));
        }
        let functionals = linalg::inverse(unit.matrix())?;
        Ok(Self {
            vectors: unit.matrix().clone(),
            duals: functionals.clone(),
            functionals,
            eps: eps.to_vec(),
        })
    }

    /// Same space with dual `j` (0-based) multiplied by `factor`; the norm
    /// itself is unchanged.
    pub fn with_corrupted_functional(mut self, j: usize, factor: f64) -> Result<Self> {
        if j >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: j + 1,
                dim: self.dim(),
            });
        }
        let mut row = self.duals.row_mut(j);
        row *= factor;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn eps_max(&self) -> f64 {
        self.eps.iter().copied().fold(0.0, f64::max)
    }

    /// Unit vector `x_j`, 0-based.
    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }

    pub fn dual_value(&self, j: usize, x: &DVector<f64>) -> f64 {
        self.duals.row(j).dot(&x.transpose())
    }

    pub fn renorm_value(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.renorm_unchecked(x))
    }

    fn renorm_unchecked(&self, x: &DVector<f64>) -> f64 {
        let coeffs = &self.functionals * x;
        coeffs.iter().fold(x.norm(), |m, c| m.max(c.abs()))
    }
}

/// `|||x|||` for `x` in the truncated space.
pub fn renorm_value(x: &DVector<f64>, space: &RenormedSpace) -> Result<f64> {
    space.renorm_value(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuerbachReport {
    pub dim: usize,
    pub eps_max: f64,
    /// `max_j | |||x_j||| - 1 |` as evaluated in floating point. Analytically
    /// `|||x_j||| = max(|x_j|, 1, 0, ..) = 1`.
    pub basis_norm_deviation_max: f64,
    /// `max_j |x_j^*(x_j) - 1|`, the attainment of `|||x_j^*||| = 1`.
    pub attainment_deviation_max: f64,
    /// `max_ij |x_i^*(x_j) - [i = j]|` and `max_j | |x_j| - 1 |`. When both
    /// vanish up to rounding, `|||x_j|||` is the finite maximum of exact
    /// values `1` and `0`.
    pub biorthogonality_residual: f64,
    pub unit_norm_residual: f64,
    pub samples: usize,
    /// `max |||x||| / |x|` over samples; at most `1 + eps_max`.
    pub sandwich_max_ratio: f64,
    /// `max (|||x + y||| - |||x||| - |||y|||) / (|||x||| + |||y|||)`.
    pub triangle_max_excess: f64,
    /// `max_j |x_j^*(x)| / |||x|||` over samples and scaled basis vectors.
    pub dual_max_ratio: f64,
    pub violations: usize,
    pub violation_examples: Vec<String>,
    pub passed: bool,
}

#[derive(Default)]
struct Tally {
    samples: usize,
    sandwich_max_ratio: f64,
    triangle_max_excess: f64,
    dual_max_ratio: f64,
    violations: usize,
    examples: Vec<String>,
}

impl Tally {
    fn violation(&mut self, msg: impl FnOnce() -> String) {
        self.violations += 1;
        if self.examples.len() < MAX_EXAMPLES {
            self.examples.push(msg());
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.samples += other.samples;
        self.sandwich_max_ratio = self.sandwich_max_ratio.max(other.sandwich_max_ratio);
        self.triangle_max_excess = self.triangle_max_excess.max(other.triangle_max_excess);
        self.dual_max_ratio = self.dual_max_ratio.max(other.dual_max_ratio);
        self.violations += other.violations;
        for e in other.examples {
            if self.examples.len() < MAX_EXAMPLES {
                self.examples.push(e);
            }
        }
        self
    }
}

fn check_duals(space: &RenormedSpace, x: &DVector<f64>, norm: f64, label: &str, tally: &mut Tally) {
    for j in 0..space.dim() {
        let v = space.dual_value(j, x).abs();
        if norm > 0.0 {
            tally.dual_max_ratio = tally.dual_max_ratio.max(v / norm);
        }
        if v > norm * (1.0 + NORM_SLACK) {
            tally.violation(|| format!("|x_{}^*({label})| = {v} exceeds |||x||| = {norm}", j + 1));
        }
    }
}

fn sample_chunk(space: &RenormedSpace, count: usize, seed: u64, stream: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let n = space.dim();
    let budget = 1.0 + space.eps_max();
    let mut tally = Tally::default();
    let draw = |rng: &mut ChaCha8Rng| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    for _ in 0..count {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let (nx, ny, nxy) = (
            space.renorm_unchecked(&x),
            space.renorm_unchecked(&y),
            space.renorm_unchecked(&(&x + &y)),
        );
        let e = x.norm();
        tally.samples += 1;
        tally.sandwich_max_ratio = tally.sandwich_max_ratio.max(nx / e);
        if nx < e || nx > budget * e * (1.0 + NORM_SLACK) {
            tally.violation(|| format!("sandwich fails: |x| = {e}, |||x||| = {nx}, bound {budget}"));
        }
        let excess = (nxy - nx - ny) / (nx + ny);
        tally.triangle_max_excess = tally.triangle_max_excess.max(excess);
        if excess > NORM_SLACK {
            tally.violation(|| format!("triangle inequality fails by {excess}"));
        }
        // powers of two scale floats exactly
        let k: i32 = rng.random_range(-8..=8);
        let lambda = if rng.random::<bool>() { 1.0 } else { -1.0 } * 2f64.powi(k);
        let scaled = space.renorm_unchecked(&(&x * lambda));
        if scaled != lambda.abs() * nx {
            tally.violation(|| format!("homogeneity fails at lambda = {lambda}"));
        }
        check_duals(space, &x, nx, "sample", &mut tally);
    }
    tally
}

/// Checks the Auerbach property of `|||.|||` exactly on basis vectors and on
/// `samples` Gaussian vectors. Chunk `c` of 1024 samples draws from ChaCha8
/// stream `c` of `seed`, so results do not depend on the thread count.
pub fn verify_auerbach_renormed(space: &RenormedSpace, samples: usize, seed: u64) -> AuerbachReport {
    let n = space.dim();
    let mut tally = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| sample_chunk(space, CHUNK.min(samples - c * CHUNK), seed, c as u64))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge);

    let mut basis_norm_deviation_max = 0.0f64;
    let mut attainment_deviation_max = 0.0f64;
    for j in 0..n {
        let xj = space.vector(j);
        let norm = space.renorm_unchecked(&xj);
        basis_norm_deviation_max = basis_norm_deviation_max.max((norm - 1.0).abs());
        attainment_deviation_max = attainment_deviation_max.max((space.dual_value(j, &xj) - 1.0).abs());
        for scale in [1.0, -3.0, 0.125] {
            let x = &xj * scale;
            let nx = space.renorm_unchecked(&x);
            check_duals(space, &x, nx, &format!("{scale} x_{}", j + 1), &mut tally);
        }
    }
    let biorthogonality_residual =
        crate::linalg::max_abs_diff(&(&space.functionals * &space.vectors), &DMatrix::identity(n, n));
    let unit_norm_residual = (0..n)
        .map(|j| (space.vectors.column(j).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    if basis_norm_deviation_max > NORM_SLACK {
        tally.violation(|| format!("|||x_j||| deviates from 1 by {basis_norm_deviation_max}"));
    }
    if attainment_deviation_max > NORM_SLACK {
        tally.violation(|| format!("x_j^*(x_j) deviates from 1 by {attainment_deviation_max}"));
    }
    AuerbachReport {
        dim: n,
        eps_max: space.eps_max(),
        basis_norm_deviation_max,
        attainment_deviation_max,
        biorthogonality_residual,
        unit_norm_residual,
        samples: tally.samples,
        sandwich_max_ratio: tally.sandwich_max_ratio,
        triangle_max_excess: tally.triangle_max_excess,
        dual_max_ratio: tally.dual_max_ratio,
        violations: tally.violations,
        passed: tally.violations == 0,
        violation_examples: tally.examples,
    }
}
