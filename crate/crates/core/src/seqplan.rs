//! Epsilon sequences, partial sums and block cut selection.
//!
//! Indices are 1-based throughout, matching the way the sequences are
//! written: `eps.get(1)` is the first term and `partial_sums(n)[k]` is
//! `s_k = eps_1 + ... + eps_k` with `s_0 = 0`.
//!
//! Two planners exist. The divergence planner cuts blocks whose masses
//! `r_m^2 = s_{n_m} - s_{n_{m-1}}` exceed the schedule `g(m) = m` and keep
//! increasing. The root-mass planner cuts blocks of length at least 32 whose
//! normalized root-mass `(n_m - n_{m-1})^{-1/2} * sum sqrt(eps_i)` reaches
//! `g(m)`. Both are greedy: each cut is the smallest admissible index.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum block length for root-mass plans.
pub const MIN_T4_BLOCK: usize = 32;

/// Default number of indices scanned per block before giving up.
pub const DEFAULT_HORIZON: usize = 10_000_000;

/// Serializable description of an epsilon generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSpec {
    Constant {
        value: f64,
    },
    /// `scale * i^(-exponent)`
    PowerLaw {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `first * ratio^(i-1)`
    Geometric {
        first: f64,
        ratio: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
    Csv {
        path: String,
    },
}

fn one() -> f64 {
    1.0
}

/// Whether `n * eps_n -> infinity` is known to hold for the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthHypothesis {
    Holds,
    Fails,
    Unknown,
}

type Generator = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Constant(f64),
    PowerLaw { exponent: f64, scale: f64 },
    Geometric { first: f64, ratio: f64 },
    Explicit(Arc<[f64]>),
    Custom(Generator),
}

/// A nonnegative sequence `eps_1, eps_2, ...` with every term in `[0, 1]`.
///
/// Terms are validated lazily: any access that produces a value outside the
/// closed unit interval (or NaN) fails with [`Error::Domain`].
#[derive(Clone)]
pub struct EpsilonSequence {
    kind: Kind,
}

impl fmt::Debug for EpsilonSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Constant(v) => write!(f, "EpsilonSequence::Constant({v})"),
            Kind::PowerLaw { exponent, scale } => {
                write!(f, "EpsilonSequence::PowerLaw({scale} * i^-{exponent})")
            }
            Kind::Geometric { first, ratio } => {
                write!(f, "EpsilonSequence::Geometric({first} * {ratio}^(i-1))")
            }
            Kind::Explicit(v) => write!(f, "EpsilonSequence::Explicit(len {})", v.len()),
            Kind::Custom(_) => write!(f, "EpsilonSequence::Custom"),
        }
    }
}

impl EpsilonSequence {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: Kind::Constant(value),
        }
    }

    pub fn power_law(exponent: f64) -> Self {
        Self::scaled_power_law(exponent, 1.0)
    }

    pub fn scaled_power_law(exponent: f64, scale: f64) -> Self {
        Self {
            kind: Kind::PowerLaw { exponent, scale },
        }
    }

    pub fn geometric(first: f64, ratio: f64) -> Self {
        Self {
            kind: Kind::Geometric { first, ratio },
        }
    }

    pub fn explicit(values: impl Into<Vec<f64>>) -> Self {
        Self {
            kind: Kind::Explicit(values.into().into()),
        }
    }

    pub fn custom(f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: Kind::Custom(Arc::new(f)),
        }
    }

    pub fn from_spec(spec: &EpsilonSpec) -> Result<Self> {
        Ok(match spec {
            EpsilonSpec::Constant { value } => Self::constant(*value),
            EpsilonSpec::PowerLaw { exponent, scale } => Self::scaled_power_law(*exponent, *scale),
            EpsilonSpec::Geometric { first, ratio } => Self::geometric(*first, *ratio),
            EpsilonSpec::Explicit { values } => Self::explicit(values.clone()),
            EpsilonSpec::Csv { path } => Self::explicit(load_csv_column(path)?),
        })
    }

    /// Length of an explicit list; `None` for generators defined on all of N.
    pub fn finite_len(&self) -> Option<usize> {
        match &self.kind {
            Kind::Explicit(v) => Some(v.len()),
            _ => None,
        }
    }

    /// The term `eps_i` (1-based).
    pub fn get(&self, i: usize) -> Result<f64> {
        if i == 0 {
            return Err(Error::IndexOutOfRange {
                index: 0,
                dim: self.finite_len().unwrap_or(usize::MAX),
            });
        }
        let value = match &self.kind {
            Kind::Constant(v) => *v,
            Kind::PowerLaw { exponent, scale } => scale * (i as f64).powf(-exponent),
            Kind::Geometric { first, ratio } => first * ratio.powi((i - 1) as i32),
            Kind::Explicit(v) => *v.get(i - 1).ok_or(Error::ListExhausted { index: i, len: v.len() })?,
            Kind::Custom(f) => f(i),
        };
        check_term(i, value)
    }

    /// Terms `eps_{start+1} ..= eps_end`, i.e. the slice owned by a block
    /// with cuts `start < end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Vec<f64>> {
        (start + 1..=end).map(|i| self.get(i)).collect()
    }

    /// Analytic check of `n * eps_n -> infinity` where the generator allows it.
    pub fn growth_hypothesis(&self) -> GrowthHypothesis {
        match &self.kind {
            Kind::Constant(v) if *v > 0.0 => GrowthHypothesis::Holds,
            Kind::Constant(_) => GrowthHypothesis::Fails,
            Kind::PowerLaw { exponent, scale } if *scale > 0.0 && *exponent < 1.0 => GrowthHypothesis::Holds,
            Kind::PowerLaw { .. } => GrowthHypothesis::Fails,
            Kind::Geometric { first, ratio } if *first > 0.0 && *ratio >= 1.0 => GrowthHypothesis::Holds,
            Kind::Geometric { .. } => GrowthHypothesis::Fails,
            Kind::Explicit(_) | Kind::Custom(_) => GrowthHypothesis::Unknown,
        }
    }
}

fn check_term(index: usize, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain { index, value })
    }
}

/// Reads a one-column CSV of epsilon values. A non-numeric first row is
/// treated as a header.
pub fn load_csv_column(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let Some(field) = record.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::config(format!("epsilon csv line {}", row + 1), e.to_string())),
        }
    }
    Ok(values)
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `s_0 ..= s_n`.
pub fn partial_sums(eps: &EpsilonSequence, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = CompensatedSum::default();
    for i in 1..=n {
        acc.add(eps.get(i)?);
        out.push(acc.value());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Masses exceed `g(m)` and strictly increase; first mass exceeds 1.
    Theorem2,
    /// Blocks of length >= 32 with normalized root-mass >= `g(m)`.
    Theorem4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub horizon: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Divergence schedule `g(m) = m`.
pub fn schedule(m: usize) -> f64 {
    m as f64
}

/// One block of a plan: global indices `start ..= end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub m: usize,
    pub start: usize,
    pub end: usize,
    /// `r_m^2`
    pub mass: f64,
    /// `t_m`, the sum of `sqrt(eps_i)` over the block.
    pub root_mass: f64,
}

impl BlockSpan {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r(&self) -> f64 {
        self.mass.sqrt()
    }

    pub fn normalized_root_mass(&self) -> f64 {
        self.root_mass / (self.len() as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub mode: PlanMode,
    /// `n_0 = 0 < n_1 < n_2 < ...`
    pub cuts: Vec<usize>,
    pub masses: Vec<f64>,
    pub root_masses: Vec<f64>,
    pub hypothesis: GrowthHypothesis,
}

impl BlockPlan {
    pub fn block_count(&self) -> usize {
        self.masses.len()
    }

    /// Block `m` (1-based).
    pub fn block(&self, m: usize) -> Result<BlockSpan> {
        if m == 0 || m > self.block_count() {
            return Err(Error::IndexOutOfRange {
                index: m,
                dim: self.block_count(),
            });
        }
        Ok(BlockSpan {
            m,
            start: self.cuts[m - 1] + 1,
            end: self.cuts[m],
            mass: self.masses[m - 1],
            root_mass: self.root_masses[m - 1],
        })
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockSpan> + '_ {
        (1..=self.block_count()).map(|m| self.block(m).expect("in range"))
    }

    pub fn r(&self, m: usize) -> Result<f64> {
        Ok(self.block(m)?.r())
    }
}

/// Incremental greedy planner; yields one block per call.
pub struct Planner<'a> {
    eps: &'a EpsilonSequence,
    mode: PlanMode,
    options: PlanOptions,
    last_cut: usize,
    prev_mass: f64,
    m: usize,
}

impl<'a> Planner<'a> {
    pub fn new(eps: &'a EpsilonSequence, mode: PlanMode, options: PlanOptions) -> Self {
        Self {
            eps,
            mode,
            options,
            last_cut: 0,
            prev_mass: 0.0,
            m: 0,
        }
    }

    pub fn next_block(&mut self) -> Result<BlockSpan> {
        let m = self.m + 1;
        let start = self.last_cut;
        let target = match self.mode {
            PlanMode::Theorem2 => schedule(m).max(self.prev_mass),
            PlanMode::Theorem4 => schedule(m),
        };
        let mut mass = CompensatedSum::default();
        let mut root = CompensatedSum::default();
        let mut best = f64::NEG_INFINITY;
        for len in 1..=self.options.horizon {
            let i = start + len;
            let e = match self.eps.get(i) {
                Ok(e) => e,
                Err(Error::ListExhausted { .. }) => break,
                Err(err) => return Err(err),
            };
            if self.mode == PlanMode::Theorem4 && e == 0.0 {
                return Err(Error::ZeroEpsilon { index: i });
            }
            mass.add(e);
            root.add(e.sqrt());
            let reached = match self.mode {
                PlanMode::Theorem2 => {
                    let s = mass.value();
                    (s > target).then_some(s).ok_or(s)
                }
                PlanMode::Theorem4 => {
                    let normalized = root.value() / (len as f64).sqrt();
                    (len >= MIN_T4_BLOCK && normalized >= target)
                        .then_some(normalized)
                        .ok_or(normalized)
                }
            };
            match reached {
                Ok(_) => {
                    self.m = m;
                    self.last_cut = i;
                    self.prev_mass = mass.value();
                    return Ok(BlockSpan {
                        m,
                        start: start + 1,
                        end: i,
                        mass: mass.value(),
                        root_mass: root.value(),
                    });
                }
                Err(v) => best = best.max(v),
            }
        }
        Err(Error::NonDivergence {
            block: m,
            start,
            horizon: self.options.horizon,
            reached: best,
            target,
        })
    }
}

fn collect_plan(eps: &EpsilonSequence, mode: PlanMode, block_count: usize, options: PlanOptions) -> Result<BlockPlan> {
    let mut planner = Planner::new(eps, mode, options);
    let mut plan = BlockPlan {
        mode,
        cuts: vec![0],
        masses: Vec::with_capacity(block_count),
        root_masses: Vec::with_capacity(block_count),
        hypothesis: eps.growth_hypothesis(),
    };
    for _ in 0..block_count {
        let span = planner.next_block()?;
        plan.cuts.push(span.end);
        plan.masses.push(span.mass);
        plan.root_masses.push(span.root_mass);
    }
    Ok(plan)
}

/// Greedy cuts with `s_{n_1} > 1`, `r_m^2 > m` and `r_m` strictly increasing.
pub fn plan_blocks_t2(eps: &EpsilonSequence, block_count: usize) -> Result<BlockPlan> {
    plan_blocks_t2_with(eps, block_count, PlanOptions::default())
}

pub fn plan_blocks_t2_with(eps: &EpsilonSequence, block_count: usize, options: PlanOptions) -> Result<BlockPlan> {
    collect_plan(eps, PlanMode::Theorem2, block_count, options)
}

/// Greedy cuts with block length >= 32 and normalized root-mass >= m.
///
/// Sequences for which `n * eps_n -> infinity` is known to fail are still
/// planned; the plan records the failed hypothesis and usually ends in a
/// [`Error::NonDivergence`] once the schedule outruns the sequence.
pub fn plan_blocks_t4(eps: &EpsilonSequence, block_count: usize) -> Result<BlockPlan> {
    plan_blocks_t4_with(eps, block_count, PlanOptions::default())
}

pub fn plan_blocks_t4_with(eps: &EpsilonSequence, block_count: usize, options: PlanOptions) -> Result<BlockPlan> {
    collect_plan(eps, PlanMode::Theorem4, block_count, options)
}

/// Extends a root-mass plan until some block reaches `threshold`, or
/// `max_blocks` is hit.
pub fn plan_t4_until(
    eps: &EpsilonSequence,
    threshold: f64,
    max_blocks: usize,
    options: PlanOptions,
) -> Result<BlockPlan> {
    let mut planner = Planner::new(eps, PlanMode::Theorem4, options);
    let mut plan = BlockPlan {
        mode: PlanMode::Theorem4,
        cuts: vec![0],
        masses: Vec::new(),
        root_masses: Vec::new(),
        hypothesis: eps.growth_hypothesis(),
    };
    while plan.block_count() < max_blocks {
        let span = planner.next_block()?;
        plan.cuts.push(span.end);
        plan.masses.push(span.mass);
        plan.root_masses.push(span.root_mass);
        if span.normalized_root_mass() >= threshold {
            return Ok(plan);
        }
    }
    Err(Error::PlanExhausted {
        blocks: plan.block_count(),
        threshold,
    })
}
