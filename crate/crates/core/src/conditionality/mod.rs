//! Conditionality witnesses against arbitrary permutations.
//!
//! Given a root-mass plan and a target `C`, pick the first block `m` whose
//! normalized root-mass reaches `3C`. For a permutation `sigma`, the
//! preimage `F = sigma^{-1}(block m)` enumerated increasingly as
//! `k_1 < k_2 < ...` carries weights `w_j = sqrt(eps_{sigma(k_j)})` with
//! total `t_m`. Splitting at the first `alpha` where the running weight
//! reaches `t_m / 2`, with signs `+1` on `E = {k_1..k_alpha}` and `-1` on the
//! rest, gives
//!
//! ```text
//! |sum_E|^2 = (s-1)/s * (w_1 + .. + w_alpha)^2 + alpha          >= t^2 / 8
//! |sum_F|^2 = (s-1)/s * (sum_j delta_j w_j)^2 + |F|              <= |F| + 4
//! ```
//!
//! so the ratio `|sum_E| / |sum_F|` is at least `t_m / sqrt(9 |F|) >= C`.
//! Every norm here comes from the closed-form Gram entries; blocks are never
//! materialized on this path.

mod oracle;
mod permutation;

use serde::{Deserialize, Serialize};

pub use oracle::{
    basis_constant_exact, best_permutation_constant, explicit_partial_sum_norm_sq, ProjectionObjective,
    BASIS_CONSTANT_CAP,
};
pub use permutation::Permutation;

use crate::blockbasis::MBasisBlock;
use crate::error::{Error, Result};
use crate::seqplan::{BlockPlan, CompensatedSum, EpsilonSequence, PlanMode};

pub(crate) fn validate_ordering(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &k in order {
        if k >= n || std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidPermutation(format!(
                "{k} repeated or out of range 0..{n}"
            )));
        }
    }
    Ok(())
}

/// Smallest block whose normalized root-mass is at least `3C`.
pub fn choose_block(plan: &BlockPlan, c: f64) -> Result<usize> {
    if plan.mode != PlanMode::Theorem4 {
        return Err(Error::PlanMode("witnesses need a theorem-4 plan"));
    }
    let threshold = 3.0 * c;
    plan.blocks()
        .find(|span| span.normalized_root_mass() >= threshold)
        .map(|span| span.m)
        .ok_or(Error::PlanExhausted {
            blocks: plan.block_count(),
            threshold,
        })
}

/// Relative slack, as a fraction of `t`, under which a running sum counts as
/// having reached `t / 2`. Equal weights put `t / 2` exactly on a prefix
/// boundary, and summation error must not push the split one step late.
pub const SPLIT_SLACK: f64 = 1e-12;

/// The split index `alpha` (a count, `1..=len`): the first position at which
/// the running sum of `weights` reaches `t / 2`, up to `SPLIT_SLACK`.
pub fn split_alpha(weights: &[f64], t: f64) -> Result<usize> {
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateSplit);
    }
    let target = t / 2.0 - SPLIT_SLACK * t;
    let mut running = CompensatedSum::default();
    for (k, &w) in weights.iter().enumerate() {
        running.add(w);
        if running.value() >= target {
            return Ok(k + 1);
        }
    }
    Ok(weights.len())
}

/// `|sum_j delta_j x_{order_j}|^2` over the first `signs.len()` positions of
/// `order` (0-based local indices), from the closed-form Gram matrix:
/// `(s-1)/s * (sum_j delta_j sqrt(eps_{order_j}))^2 + M`.
pub fn partial_sum_norm_sq(block: &MBasisBlock, order: &[usize], signs: &[i8]) -> Result<f64> {
    if signs.is_empty() || signs.len() > order.len() {
        return Err(Error::LengthMismatch {
            expected: order.len(),
            got: signs.len(),
        });
    }
    let mut acc = CompensatedSum::default();
    for (&k, &d) in order.iter().zip(signs) {
        if k >= block.dim() {
            return Err(Error::IndexOutOfRange {
                index: k + 1,
                dim: block.dim(),
            });
        }
        if d != 1 && d != -1 {
            return Err(Error::Precondition(format!("sign {d} is not +1 or -1")));
        }
        acc.add(f64::from(d) * block.sqrt_eps()[k]);
    }
    let sum = acc.value();
    Ok(block.rank_one_weight() * sum * sum + signs.len() as f64)
}

/// E/F split of an ordered weight list, shared by plan witnesses and
/// single-block witnesses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub len: usize,
    /// Count of leading `+1` signs.
    pub alpha: usize,
    pub t: f64,
    /// `w_1 + .. + w_alpha`
    pub head: f64,
    /// `sum_j delta_j w_j = 2 head - t`
    pub signed_sum: f64,
    /// `w_alpha`
    pub weight_at_alpha: f64,
    pub e_norm_sq: f64,
    pub f_norm_sq: f64,
    pub ratio: f64,
    /// `t / sqrt(9 len)`
    pub guaranteed_bound: f64,
}

/// Splits `weights` (the `sqrt(eps)` values in permuted order) and evaluates
/// both sign-sum norms with rank-one weight `(s-1)/s`.
pub fn split_weights(rank_one_weight: f64, weights: &[f64]) -> Result<Split> {
    let mut total = CompensatedSum::default();
    for &w in weights {
        total.add(w);
    }
    let t = total.value();
    let alpha = split_alpha(weights, t)?;
    let mut head = CompensatedSum::default();
    for &w in &weights[..alpha] {
        head.add(w);
    }
    let head = head.value();
    let signed_sum = 2.0 * head - t;
    let len = weights.len();
    let e_norm_sq = rank_one_weight * head * head + alpha as f64;
    let f_norm_sq = rank_one_weight * signed_sum * signed_sum + len as f64;
    Ok(Split {
        len,
        alpha,
        t,
        head,
        signed_sum,
        weight_at_alpha: weights[alpha - 1],
        e_norm_sq,
        f_norm_sq,
        ratio: (e_norm_sq / f_norm_sq).sqrt(),
        guaranteed_bound: t / (9.0 * len as f64).sqrt(),
    })
}

/// Witness on a single block for a local ordering (0-based positions).
pub fn block_witness(block: &MBasisBlock, order: &[usize]) -> Result<Split> {
    validate_ordering(order, block.dim())?;
    let weights: Vec<f64> = order.iter().map(|&k| block.sqrt_eps()[k]).collect();
    split_weights(block.rank_one_weight(), &weights)
}

/// Certificate that the permuted system has basis constant at least `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(rename = "C")]
    pub c: f64,
    pub m: usize,
    pub block_start: usize,
    pub block_end: usize,
    /// `sigma^{-1}(block)`, increasing.
    #[serde(rename = "F")]
    pub f: Vec<usize>,
    /// Leading `alpha` elements of `F`.
    #[serde(rename = "E")]
    pub e: Vec<usize>,
    /// Size of `E`.
    pub alpha: usize,
    /// `alpha` counted in the block's global numbering, `n_{m-1} + alpha`.
    pub alpha_index: usize,
    pub t_m: f64,
    /// `r_m^2`
    pub mass: f64,
    pub e_norm_sq: f64,
    pub f_norm_sq: f64,
    pub ratio: f64,
    pub guaranteed_bound: f64,
    pub signed_sum: f64,
    /// `eps_{sigma(k_alpha)}`, the term bounding the signed sum.
    pub eps_at_alpha_permuted: f64,
    /// `eps_{k_alpha}` in the unpermuted numbering.
    pub eps_at_alpha_original: f64,
}

/// Builds the E/F witness for `sigma` against target `c`.
pub fn find_witness(plan: &BlockPlan, eps: &EpsilonSequence, sigma: &Permutation, c: f64) -> Result<Witness> {
    let m = choose_block(plan, c)?;
    let span = plan.block(m)?;
    if sigma.len() < span.end {
        return Err(Error::PermutationRange {
            needed: span.end,
            have: sigma.len(),
        });
    }
    let f = sigma.preimage_of_range(span.start, span.end);
    debug_assert_eq!(f.len(), span.len());
    let weights = f
        .iter()
        .map(|&nu| eps.get(sigma.apply(nu)).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let split = split_weights((span.mass - 1.0) / span.mass, &weights)?;
    let k_alpha = f[split.alpha - 1];
    Ok(Witness {
        c,
        m,
        block_start: span.start,
        block_end: span.end,
        e: f[..split.alpha].to_vec(),
        alpha: split.alpha,
        alpha_index: span.start - 1 + split.alpha,
        t_m: split.t,
        mass: span.mass,
        e_norm_sq: split.e_norm_sq,
        f_norm_sq: split.f_norm_sq,
        ratio: split.ratio,
        guaranteed_bound: split.guaranteed_bound,
        signed_sum: split.signed_sum,
        eps_at_alpha_permuted: eps.get(sigma.apply(k_alpha))?,
        eps_at_alpha_original: eps.get(k_alpha)?,
        f,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessBoundsReport {
    pub structure_ok: bool,
    pub alpha_ok: bool,
    /// `|signed_sum| < 2 sqrt(eps_{sigma(k_alpha)}) <= 2`
    pub small_estimate: f64,
    pub small_estimate_bound: f64,
    pub small_estimate_ok: bool,
    /// `|sum_F|^2 <= len + 4`
    pub f_norm_sq: f64,
    pub f_bound: f64,
    pub f_ok: bool,
    /// `|sum_E|^2 >= t^2 / 8`
    pub e_norm_sq: f64,
    pub e_bound: f64,
    pub e_ok: bool,
    /// `ratio >= t / sqrt(9 len) >= C`
    pub ratio_ok: bool,
    /// Norms recomputed from scratch agree with the witness.
    pub recompute_ok: bool,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Re-derives the witness from `eps` and `sigma` and checks every inequality
/// the E/F argument relies on. A failure indicates a construction bug.
pub fn witness_bounds_check(w: &Witness, eps: &EpsilonSequence, sigma: &Permutation) -> Result<WitnessBoundsReport> {
    let mut failures = Vec::new();
    let len = w.block_end + 1 - w.block_start;

    let increasing = w.f.windows(2).all(|p| p[0] < p[1]);
    let images_in_block =
        w.f.iter()
            .all(|&nu| (w.block_start..=w.block_end).contains(&sigma.apply(nu)));
    let e_prefix = w.e.len() == w.alpha && w.f.starts_with(&w.e) && w.alpha >= 1;
    let structure_ok = increasing && images_in_block && w.f.len() == len && e_prefix;
    if !structure_ok {
        failures.push("F is not the increasing preimage of the block, or E is not its prefix".into());
    }

    let weights =
        w.f.iter()
            .map(|&nu| eps.get(sigma.apply(nu)).map(f64::sqrt))
            .collect::<Result<Vec<_>>>()?;
    let sum = |ws: &[f64]| {
        let mut acc = CompensatedSum::default();
        ws.iter().for_each(|&x| acc.add(x));
        acc.value()
    };
    let t = sum(&weights);
    let head = sum(&weights[..w.alpha]);
    let before = sum(&weights[..w.alpha - 1]);
    let target = t / 2.0 - SPLIT_SLACK * t;
    let alpha_ok = head >= target && before < target;
    if !alpha_ok {
        failures.push(format!(
            "alpha = {} violates the split condition ({before} < {} <= {head})",
            w.alpha,
            t / 2.0
        ));
    }

    let small_estimate = (2.0 * head - t).abs();
    let small_estimate_bound = 2.0 * w.eps_at_alpha_permuted.sqrt();
    let small_estimate_ok = small_estimate < small_estimate_bound && small_estimate_bound <= 2.0;
    if !small_estimate_ok {
        failures.push(format!(
            "|signed sum| = {small_estimate} not below {small_estimate_bound}"
        ));
    }

    let weight = (w.mass - 1.0) / w.mass;
    let e_norm_sq = weight * head * head + w.alpha as f64;
    let f_norm_sq = weight * (2.0 * head - t).powi(2) + len as f64;
    let f_bound = len as f64 + 4.0;
    let e_bound = t * t / 8.0;
    let f_ok = f_norm_sq <= f_bound;
    let e_ok = e_norm_sq >= e_bound;
    if !f_ok {
        failures.push(format!("|sum_F|^2 = {f_norm_sq} exceeds {f_bound}"));
    }
    if !e_ok {
        failures.push(format!("|sum_E|^2 = {e_norm_sq} below {e_bound}"));
    }
    let ratio_ok = w.ratio >= w.guaranteed_bound && w.guaranteed_bound >= w.c;
    if !ratio_ok {
        failures.push(format!(
            "ratio {} / guaranteed {} / target {} out of order",
            w.ratio, w.guaranteed_bound, w.c
        ));
    }
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    let recompute_ok = rel(e_norm_sq, w.e_norm_sq) && rel(f_norm_sq, w.f_norm_sq) && rel(t, w.t_m);
    if !recompute_ok {
        failures.push("recomputed norms disagree with the witness".into());
    }
    Ok(WitnessBoundsReport {
        structure_ok,
        alpha_ok,
        small_estimate,
        small_estimate_bound,
        small_estimate_ok,
        f_norm_sq,
        f_bound,
        f_ok,
        e_norm_sq,
        e_bound,
        e_ok,
        ratio_ok,
        recompute_ok,
        passed: failures.is_empty(),
        failures,
    })
}
