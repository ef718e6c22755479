//! Walsh characters of `Z_2^m` as an Auerbach system in `L^1` and `L^p`.
//!
//! `chi_j(s) = (-1)^{popcount(j & s)}` for `j, s` in `0..2^m`. Under the
//! normalized counting measure every character has `L^1` and `L^inf` norm 1,
//! and the characters are their own dual functionals. All kernels here work
//! on integers; norms are integer numerators over `N = 2^m`, which divide
//! exactly in floating point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditionality::validate_ordering;
use crate::error::{Error, Result};
use crate::search::{enumerate_all, minimize, PrefixObjective, SearchOptions, SearchOutcome};

/// Largest rank for dense character tables.
pub const MAX_RANK: u32 = 12;
/// Largest rank for ordering searches.
pub const SEARCH_MAX_RANK: u32 = 6;
/// Sign patterns are enumerated exhaustively when `2^N` is at most this.
pub const EXHAUSTIVE_SIGN_PATTERNS: usize = 1 << 10;
/// Sampled sign patterns per coefficient vector otherwise.
pub const SAMPLED_SIGN_PATTERNS: usize = 1024;
/// Integer coefficients are drawn from `-COEFF_RANGE..=COEFF_RANGE`.
pub const COEFF_RANGE: i64 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacterSystem {
    m: u32,
    /// Row `j` holds `chi_j` in natural order, `N x N` row-major.
    rows: Vec<i8>,
    order: Vec<usize>,
    pristine: bool,
}

/// All `2^m` characters of `Z_2^m` in binary-index order.
pub fn walsh_system(m: u32) -> Result<CharacterSystem> {
    if m == 0 || m > MAX_RANK {
        return Err(Error::TooLarge {
            dim: m as usize,
            cap: MAX_RANK as usize,
            hint: "rank must lie in 1..=12 for dense character tables",
        });
    }
    let n = 1usize << m;
    let mut rows = vec![0i8; n * n];
    for j in 0..n {
        for s in 0..n {
            rows[j * n + s] = if (j & s).count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    Ok(CharacterSystem {
        m,
        rows,
        order: (0..n).collect(),
        pristine: true,
    })
}

impl CharacterSystem {
    pub fn m(&self) -> u32 {
        self.m
    }

    /// `N = 2^m`, both the group order and the number of characters.
    pub fn size(&self) -> usize {
        1 << self.m
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `chi_j(s)`, natural indexing.
    pub fn value(&self, j: usize, s: usize) -> i8 {
        self.rows[j * self.size() + s]
    }

    pub fn row(&self, j: usize) -> &[i8] {
        let n = self.size();
        &self.rows[j * n..(j + 1) * n]
    }

    /// Reorders the characters; `order` is 0-based natural indices.
    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self> {
        validate_ordering(&order, self.size())?;
        self.order = order;
        Ok(self)
    }

    /// Flips the sign of `chi_j(s)`, breaking the character property.
    pub fn corrupt_entry(&mut self, j: usize, s: usize) -> Result<()> {
        let n = self.size();
        for (index, dim) in [(j, n), (s, n)] {
            if index >= dim {
                return Err(Error::IndexOutOfRange { index: index + 1, dim });
            }
        }
        self.rows[j * n + s] = -self.rows[j * n + s];
        self.pristine = false;
        Ok(())
    }

    pub fn is_pristine(&self) -> bool {
        self.pristine
    }

    /// `(sum_j c_j chi_j)(s)` for every `s`, `c` in natural indexing.
    fn synthesize(&self, c: &[i64]) -> Vec<i64> {
        if self.pristine {
            let mut v = c.to_vec();
            fwht(&mut v);
            v
        } else {
            let n = self.size();
            let mut v = vec![0i64; n];
            for (j, &cj) in c.iter().enumerate() {
                if cj != 0 {
                    for (out, &x) in v.iter_mut().zip(self.row(j)) {
                        *out += cj * i64::from(x);
                    }
                }
            }
            v
        }
    }

    /// `sum_s |nu_k(s)|` for the prefix `nu_k = chi_{o_1} + .. + chi_{o_k}`.
    pub fn prefix_l1_numerator(&self, k: usize) -> Result<u64> {
        let n = self.size();
        if k == 0 || k > n {
            return Err(Error::IndexOutOfRange { index: k, dim: n });
        }
        let mut sums = vec![0i64; n];
        for &j in &self.order[..k] {
            for (out, &x) in sums.iter_mut().zip(self.row(j)) {
                *out += i64::from(x);
            }
        }
        Ok(sums.iter().map(|v| v.unsigned_abs()).sum())
    }

    /// Normalized `L^1` norm of the `k`-th prefix sum.
    pub fn prefix_l1_norm(&self, k: usize) -> Result<f64> {
        Ok(self.prefix_l1_numerator(k)? as f64 / self.size() as f64)
    }

    /// Numerators of all prefix norms, `k = 1..=N`.
    pub fn prefix_profile_numerators(&self) -> Vec<u64> {
        let n = self.size();
        let mut sums = vec![0i64; n];
        self.order
            .iter()
            .map(|&j| {
                for (out, &x) in sums.iter_mut().zip(self.row(j)) {
                    *out += i64::from(x);
                }
                sums.iter().map(|v| v.unsigned_abs()).sum()
            })
            .collect()
    }

    pub fn prefix_profile(&self) -> Vec<f64> {
        let n = self.size() as f64;
        self.prefix_profile_numerators()
            .into_iter()
            .map(|v| v as f64 / n)
            .collect()
    }

    /// `max_k` of the prefix norms in the current order.
    pub fn max_prefix_l1(&self) -> f64 {
        self.prefix_profile().into_iter().fold(0.0, f64::max)
    }
}

pub fn prefix_l1_norm(sys: &CharacterSystem, k: usize) -> Result<f64> {
    sys.prefix_l1_norm(k)
}

/// In-place Walsh-Hadamard transform in natural order.
pub fn fwht(v: &mut [i64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Prefix-norm objective over characters; items are natural indices.
pub struct PrefixL1Objective<'a> {
    sys: &'a CharacterSystem,
}

impl<'a> PrefixL1Objective<'a> {
    pub fn new(sys: &'a CharacterSystem) -> Self {
        Self { sys }
    }
}

impl PrefixObjective for PrefixL1Objective<'_> {
    type State = Vec<i64>;

    fn size(&self) -> usize {
        self.sys.size()
    }

    fn empty(&self) -> Vec<i64> {
        vec![0; self.sys.size()]
    }

    fn push(&self, state: &mut Vec<i64>, item: usize) {
        for (out, &x) in state.iter_mut().zip(self.sys.row(item)) {
            *out += i64::from(x);
        }
    }

    fn cost(&self, state: &Vec<i64>) -> f64 {
        state.iter().map(|v| v.unsigned_abs()).sum::<u64>() as f64 / state.len() as f64
    }
}

fn check_search_rank(sys: &CharacterSystem) -> Result<()> {
    if sys.m > SEARCH_MAX_RANK {
        return Err(Error::TooLarge {
            dim: sys.m as usize,
            cap: SEARCH_MAX_RANK as usize,
            hint: "ordering search over characters is limited to rank 6",
        });
    }
    Ok(())
}

/// Minimum over orderings of the largest prefix norm. Exhaustive for
/// `N <= options.exhaustive_cap`, an upper bound otherwise.
pub fn min_max_prefix_l1(sys: &CharacterSystem, options: &SearchOptions) -> Result<SearchOutcome> {
    check_search_rank(sys)?;
    Ok(minimize(&PrefixL1Objective::new(sys), options))
}

/// Every ordering with its largest prefix norm, lexicographically.
pub fn ordering_table(sys: &CharacterSystem) -> Result<Vec<(Vec<usize>, f64)>> {
    if sys.size() > crate::search::EXHAUSTIVE_CAP {
        return Err(Error::TooLarge {
            dim: sys.size(),
            cap: crate::search::EXHAUSTIVE_CAP,
            hint: "the ordering table has N! rows",
        });
    }
    Ok(enumerate_all(&PrefixL1Objective::new(sys)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnconditionalityEstimate {
    pub m: u32,
    pub p: f64,
    pub trials: usize,
    /// Trials whose coefficient vector was zero and got skipped.
    pub skipped: usize,
    pub exhaustive_signs: bool,
    pub sign_patterns: usize,
    pub lower_bound: f64,
    /// Coefficients (natural indexing) and signs attaining `lower_bound`.
    pub coefficients: Vec<i64>,
    pub signs: Vec<i8>,
}

fn power_sum(values: &[i64], p: f64) -> PowerSum {
    let integer = p.fract() == 0.0 && p <= 8.0;
    if integer {
        let e = p as u32;
        PowerSum::Exact(values.iter().map(|v| u128::from(v.unsigned_abs()).pow(e)).sum())
    } else {
        PowerSum::Float(values.iter().map(|v| (v.unsigned_abs() as f64).powf(p)).sum())
    }
}

enum PowerSum {
    Exact(u128),
    Float(f64),
}

impl PowerSum {
    fn ratio(&self, den: &PowerSum, p: f64) -> f64 {
        match (self, den) {
            (PowerSum::Exact(a), PowerSum::Exact(b)) if a == b => 1.0,
            (PowerSum::Exact(a), PowerSum::Exact(b)) => (*a as f64 / *b as f64).powf(1.0 / p),
            (PowerSum::Float(a), PowerSum::Float(b)) => (a / b).powf(1.0 / p),
            _ => unreachable!("same exponent on both sides"),
        }
    }
}

fn sign_vector(bits: u64, n: usize) -> Vec<i8> {
    (0..n).map(|j| if bits >> j & 1 == 1 { -1 } else { 1 }).collect()
}

/// Lower bound on the unconditionality constant in `L^p`: the largest
/// `|sum theta_j a_j chi_j|_p / |sum a_j chi_j|_p` over `trials` random
/// integer coefficient vectors and all (or 1024 sampled) sign patterns.
/// Trial `t` draws from ChaCha8 stream `t` of `seed`.
pub fn unconditionality_constant_lp(
    sys: &CharacterSystem,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<UnconditionalityEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::config("p", format!("exponent {p} outside [1, inf)")));
    }
    if trials == 0 {
        return Err(Error::config("trials", "need at least one trial"));
    }
    let n = sys.size();
    let exhaustive = n < 64 && (1usize << n) <= EXHAUSTIVE_SIGN_PATTERNS;
    let patterns = if exhaustive { 1usize << n } else { SAMPLED_SIGN_PATTERNS };

    let per_trial: Vec<Option<(f64, Vec<i64>, Vec<i8>)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let a: Vec<i64> = (0..n).map(|_| rng.random_range(-COEFF_RANGE..=COEFF_RANGE)).collect();
            if a.iter().all(|&x| x == 0) {
                return None;
            }
            let den = power_sum(&sys.synthesize(&a), p);
            let mut best = (1.0, vec![1i8; n]);
            for k in 0..patterns {
                let theta = if exhaustive {
                    sign_vector(k as u64, n)
                } else {
                    (0..n).map(|_| if rng.random::<bool>() { -1 } else { 1 }).collect()
                };
                let c: Vec<i64> = a.iter().zip(&theta).map(|(x, s)| x * i64::from(*s)).collect();
                let r = power_sum(&sys.synthesize(&c), p).ratio(&den, p);
                if r > best.0 {
                    best = (r, theta);
                }
            }
            Some((best.0, a, best.1))
        })
        .collect();

    let skipped = per_trial.iter().filter(|r| r.is_none()).count();
    let (lower_bound, coefficients, signs) = per_trial.into_iter().flatten().fold(
        (1.0, Vec::new(), Vec::new()),
        |acc, r| if r.0 > acc.0 { r } else { acc },
    );
    Ok(UnconditionalityEstimate {
        m: sys.m,
        p,
        trials,
        skipped,
        exhaustive_signs: exhaustive,
        sign_patterns: patterns,
        lower_bound,
        coefficients,
        signs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuerbachL1Report {
    pub m: u32,
    pub size: usize,
    /// Every character has `sum_s |chi(s)| = N`.
    pub l1_norms_ok: bool,
    /// Every character has `max_s |chi(s)| = 1`.
    pub linf_norms_ok: bool,
    /// Pairs `(i, j)`, 1-based, with `sum_s chi_i(s) chi_j(s) != N [i = j]`.
    pub orthogonality_failures: usize,
    pub first_failure: Option<(usize, usize, i64)>,
    pub passed: bool,
}

/// Exact check that the characters and their duals are unit-norm and
/// biorthogonal. Inner products use bit-packed rows and popcounts.
pub fn auerbach_check_l1(sys: &CharacterSystem) -> AuerbachL1Report {
    let n = sys.size();
    let l1_norms_ok = (0..n).all(|j| sys.row(j).iter().map(|&x| u64::from(x.unsigned_abs())).sum::<u64>() == n as u64);
    let linf_norms_ok = (0..n).all(|j| sys.row(j).iter().map(|x| x.unsigned_abs()).max() == Some(1));

    let words = n.div_ceil(64);
    let packed: Vec<Vec<u64>> = (0..n)
        .map(|j| {
            let mut bits = vec![0u64; words];
            for (s, &x) in sys.row(j).iter().enumerate() {
                if x < 0 {
                    bits[s / 64] |= 1 << (s % 64);
                }
            }
            bits
        })
        .collect();
    let inner = |i: usize, j: usize| -> i64 {
        let differ: u32 = packed[i]
            .iter()
            .zip(&packed[j])
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        n as i64 - 2 * i64::from(differ)
    };
    // popcount inner products are only valid for +-1 entries
    let failures: Vec<(usize, usize, i64)> = if linf_norms_ok && l1_norms_ok {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (i..n).filter_map(move |j| {
                    let v = inner(i, j);
                    let expected = if i == j { n as i64 } else { 0 };
                    (v != expected).then_some((i + 1, j + 1, v))
                })
            })
            .collect()
    } else {
        Vec::new()
    };
    AuerbachL1Report {
        m: sys.m,
        size: n,
        l1_norms_ok,
        linf_norms_ok,
        orthogonality_failures: failures.len(),
        first_failure: failures.first().copied(),
        passed: l1_norms_ok && linf_norms_ok && failures.is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tables() {
        let w1 = walsh_system(1).unwrap();
        assert_eq!(w1.rows, vec![1, 1, 1, -1]);
        let w2 = walsh_system(2).unwrap();
        assert_eq!(w2.rows, vec![1, 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, 1, -1, -1, 1]);
        assert!(walsh_system(0).is_err());
        assert!(walsh_system(13).is_err());
    }

    #[test]
    fn natural_prefix_norms_rank_two() {
        let w2 = walsh_system(2).unwrap();
        assert_eq!(w2.prefix_profile_numerators(), vec![4, 4, 6, 4]);
        assert_eq!(w2.prefix_profile(), vec![1.0, 1.0, 1.5, 1.0]);
        assert_eq!(prefix_l1_norm(&w2, 3).unwrap(), 1.5);
        assert!(w2.prefix_l1_norm(0).is_err());
        assert!(w2.prefix_l1_norm(5).is_err());
    }

    #[test]
    fn fwht_matches_rows() {
        let w = walsh_system(4).unwrap();
        let c: Vec<i64> = (0..16).map(|j| (j as i64 * 7) % 5 - 2).collect();
        let mut direct = vec![0i64; 16];
        for j in 0..16 {
            for s in 0..16 {
                direct[s] += c[j] * i64::from(w.value(j, s));
            }
        }
        let mut fast = c.clone();
        fwht(&mut fast);
        assert_eq!(fast, direct);
    }

    #[test]
    fn rank_one_orderings() {
        let w1 = walsh_system(1).unwrap();
        let table = ordering_table(&w1).unwrap();
        assert_eq!(table, vec![(vec![0, 1], 1.0), (vec![1, 0], 1.0)]);
        let best = min_max_prefix_l1(&w1, &SearchOptions::default()).unwrap();
        assert_eq!(best.value, 1.0);
        assert!(best.exact);
    }

    #[test]
    fn rank_two_table_has_24_rows() {
        let w2 = walsh_system(2).unwrap();
        let table = ordering_table(&w2).unwrap();
        assert_eq!(table.len(), 24);
        let min = table.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let best = min_max_prefix_l1(&w2, &SearchOptions::default()).unwrap();
        assert_eq!(best.value, min);
        assert!(best.value >= 1.0 && best.value <= w2.max_prefix_l1());
    }

    #[test]
    fn parseval_gives_one() {
        for m in 1..=4 {
            let w = walsh_system(m).unwrap();
            let est = unconditionality_constant_lp(&w, 2.0, 5, 11).unwrap();
            assert_eq!(est.lower_bound, 1.0);
        }
    }

    #[test]
    fn l1_rank_two_exhaustive_signs() {
        let w2 = walsh_system(2).unwrap();
        let est = unconditionality_constant_lp(&w2, 1.0, 10, 2).unwrap();
        assert!(est.exhaustive_signs);
        assert_eq!(est.sign_patterns, 16);
        assert!(est.lower_bound >= 1.0);
        // a = (1,1,1,1) with one sign flipped: sum = 4 delta_0 vs |.|_1 = 4 + ...
        let base = w2.synthesize(&[1, 1, 1, 1]);
        let flip = w2.synthesize(&[1, 1, 1, -1]);
        let l1 = |v: &[i64]| v.iter().map(|x| x.abs()).sum::<i64>();
        assert_eq!(l1(&base), 4);
        assert_eq!(l1(&flip), 8);
    }

    #[test]
    fn auerbach_exact_and_corruption_detected() {
        for m in 1..=6 {
            assert!(auerbach_check_l1(&walsh_system(m).unwrap()).passed);
        }
        let mut w = walsh_system(3).unwrap();
        w.corrupt_entry(2, 5).unwrap();
        let r = auerbach_check_l1(&w);
        assert!(!r.passed);
        assert!(r.l1_norms_ok && r.linf_norms_ok);
        assert_eq!(r.orthogonality_failures, 7);
        // corrupted tables fall back to direct synthesis
        let est = unconditionality_constant_lp(&w, 2.0, 3, 1).unwrap();
        assert!(est.lower_bound >= 1.0);
    }

    #[test]
    fn search_rank_cap() {
        let w = walsh_system(7).unwrap();
        assert!(min_max_prefix_l1(&w, &SearchOptions::default()).is_err());
    }
}
