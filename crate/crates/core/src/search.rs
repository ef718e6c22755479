//! Minimizing a max-over-prefixes cost over orderings.
//!
//! Both the basis-constant oracle and the character Lebesgue constants have
//! the same shape: an ordering `o` of `n` items has cost
//! `max_k cost({o_1, ..., o_k})`, where the prefix cost depends only on the
//! *set* of items pushed so far. [`PrefixObjective`] captures that, and the
//! searches here use it three ways:
//!
//! * [`exhaustive_min`]: depth-first over all `n!` orderings with
//!   branch-and-bound, parallel over the first item.
//! * [`subset_min`]: dynamic programming over the `2^n` prefix sets. It is
//!   exact and independent of the enumeration, so the two cross-check.
//! * [`heuristic_min`]: greedy insertion followed by pairwise-swap local
//!   search from seeded restarts; the result is an upper bound.
//!
//! Ties are broken towards the lexicographically smallest ordering, so the
//! parallel searches are reproducible.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Cost of growing prefix sets. `cost` must depend only on the set of items
/// pushed into the state, not on the order they were pushed in.
pub trait PrefixObjective: Sync {
    type State: Clone + Send;

    fn size(&self) -> usize;
    fn empty(&self) -> Self::State;
    fn push(&self, state: &mut Self::State, item: usize);
    fn cost(&self, state: &Self::State) -> f64;
}

/// Orderings up to this length are searched exhaustively by default.
pub const EXHAUSTIVE_CAP: usize = 8;

/// Hard limit for the subset dynamic program.
pub const SUBSET_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub exhaustive_cap: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_passes: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            exhaustive_cap: EXHAUSTIVE_CAP,
            seed: 0,
            restarts: 4,
            max_passes: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Subsets,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub value: f64,
    /// 0-based item order.
    pub ordering: Vec<usize>,
    pub mode: SearchMode,
    /// `false` when `value` is only an upper bound on the minimum.
    pub exact: bool,
}

fn better(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.1 < b.1,
    }
}

/// Prefix costs `cost(o_1..o_k)` for `k = 1..=n`.
pub fn prefix_costs<O: PrefixObjective>(obj: &O, ordering: &[usize]) -> Vec<f64> {
    let mut state = obj.empty();
    ordering
        .iter()
        .map(|&j| {
            obj.push(&mut state, j);
            obj.cost(&state)
        })
        .collect()
}

pub fn ordering_cost<O: PrefixObjective>(obj: &O, ordering: &[usize]) -> f64 {
    prefix_costs(obj, ordering)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Every ordering with its cost, in lexicographic order. Intended for
/// small `n` (the table has `n!` rows).
pub fn enumerate_all<O: PrefixObjective>(obj: &O) -> Vec<(Vec<usize>, f64)> {
    let n = obj.size();
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    let mut used = vec![false; n];
    enumerate_rec(obj, &obj.empty(), f64::NEG_INFINITY, &mut prefix, &mut used, &mut out);
    out
}

fn enumerate_rec<O: PrefixObjective>(
    obj: &O,
    state: &O::State,
    running: f64,
    prefix: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    if prefix.len() == used.len() {
        out.push((prefix.clone(), running));
        return;
    }
    for j in 0..used.len() {
        if used[j] {
            continue;
        }
        let mut next = state.clone();
        obj.push(&mut next, j);
        let c = running.max(obj.cost(&next));
        used[j] = true;
        prefix.push(j);
        enumerate_rec(obj, &next, c, prefix, used, out);
        prefix.pop();
        used[j] = false;
    }
}

struct Best {
    value: f64,
    ordering: Vec<usize>,
}

fn dfs<O: PrefixObjective>(
    obj: &O,
    state: &O::State,
    running: f64,
    prefix: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut Best,
) {
    if prefix.len() == used.len() {
        if better((running, prefix), (best.value, &best.ordering)) {
            best.value = running;
            best.ordering.clone_from(prefix);
        }
        return;
    }
    for j in 0..used.len() {
        if used[j] {
            continue;
        }
        let mut next = state.clone();
        obj.push(&mut next, j);
        let c = running.max(obj.cost(&next));
        // lexicographic DFS: an equal-cost completion can never replace `best`
        if c >= best.value {
            continue;
        }
        used[j] = true;
        prefix.push(j);
        dfs(obj, &next, c, prefix, used, best);
        prefix.pop();
        used[j] = false;
    }
}

/// Exact minimum by enumerating orderings with branch-and-bound.
pub fn exhaustive_min<O: PrefixObjective>(obj: &O) -> SearchOutcome {
    let n = obj.size();
    if n == 0 {
        return SearchOutcome {
            value: f64::NEG_INFINITY,
            ordering: Vec::new(),
            mode: SearchMode::Exhaustive,
            exact: true,
        };
    }
    let best = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut state = obj.empty();
            obj.push(&mut state, first);
            let running = obj.cost(&state);
            let mut used = vec![false; n];
            used[first] = true;
            let mut prefix = vec![first];
            let mut best = Best {
                value: f64::INFINITY,
                ordering: Vec::new(),
            };
            dfs(obj, &state, running, &mut prefix, &mut used, &mut best);
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| {
            if better((b.value, &b.ordering), (a.value, &a.ordering)) {
                b
            } else {
                a
            }
        })
        .expect("n > 0");
    SearchOutcome {
        value: best.value,
        ordering: best.ordering,
        mode: SearchMode::Exhaustive,
        exact: true,
    }
}

/// Exact minimum by dynamic programming over prefix sets.
///
/// `tail[S]` is the best achievable max over the prefixes that extend `S`;
/// `tail[S] = min_{j not in S} max(cost(S + j), tail[S + j])`.
pub fn subset_min<O: PrefixObjective>(obj: &O) -> SearchOutcome {
    let n = obj.size();
    assert!(n <= SUBSET_CAP, "subset search supports at most {SUBSET_CAP} items");
    let full: usize = (1 << n) - 1;
    let costs: Vec<f64> = (0..=full)
        .into_par_iter()
        .map(|mask| {
            if mask == 0 {
                return f64::NEG_INFINITY;
            }
            let mut state = obj.empty();
            for j in (0..n).filter(|j| mask & (1 << j) != 0) {
                obj.push(&mut state, j);
            }
            obj.cost(&state)
        })
        .collect();
    let mut tail = vec![f64::INFINITY; full + 1];
    tail[full] = f64::NEG_INFINITY;
    for mask in (0..full).rev() {
        let mut t = f64::INFINITY;
        for j in (0..n).filter(|j| mask & (1 << j) == 0) {
            let next = mask | (1 << j);
            t = t.min(costs[next].max(tail[next]));
        }
        tail[mask] = t;
    }
    let mut ordering = Vec::with_capacity(n);
    let mut mask = 0usize;
    while mask != full {
        let target = tail[mask];
        let j = (0..n)
            .filter(|j| mask & (1 << j) == 0)
            .find(|&j| {
                let next = mask | (1 << j);
                costs[next].max(tail[next]) == target
            })
            .expect("minimizer exists");
        ordering.push(j);
        mask |= 1 << j;
    }
    SearchOutcome {
        value: tail[0],
        ordering,
        mode: SearchMode::Subsets,
        exact: true,
    }
}

/// Greedy insertion: repeatedly append the item whose prefix cost is smallest.
pub fn greedy_ordering<O: PrefixObjective>(obj: &O) -> Vec<usize> {
    let n = obj.size();
    let mut state = obj.empty();
    let mut used = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    for _ in 0..n {
        let (j, next) = (0..n)
            .filter(|&j| !used[j])
            .map(|j| {
                let mut s = state.clone();
                obj.push(&mut s, j);
                (j, s)
            })
            .min_by(|a, b| obj.cost(&a.1).total_cmp(&obj.cost(&b.1)).then(a.0.cmp(&b.0)))
            .expect("item left");
        used[j] = true;
        ordering.push(j);
        state = next;
    }
    ordering
}

/// First-improvement pairwise-swap descent. Swapping positions `i < j` only
/// changes the prefix sets of lengths `i+1 ..= j`, so each trial recomputes
/// just that window.
pub fn swap_descent<O: PrefixObjective>(obj: &O, mut ordering: Vec<usize>, max_passes: usize) -> (Vec<usize>, f64) {
    let n = ordering.len();
    let mut costs = prefix_costs(obj, &ordering);
    for _ in 0..max_passes {
        let mut improved = false;
        let current = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // states[k] = state after pushing ordering[..k]
        let mut states = Vec::with_capacity(n + 1);
        states.push(obj.empty());
        for k in 0..n {
            let mut s = states[k].clone();
            obj.push(&mut s, ordering[k]);
            states.push(s);
        }
        let mut head_max = vec![f64::NEG_INFINITY; n + 1];
        for k in 0..n {
            head_max[k + 1] = head_max[k].max(costs[k]);
        }
        let mut tail_max = vec![f64::NEG_INFINITY; n + 1];
        for k in (0..n).rev() {
            tail_max[k] = tail_max[k + 1].max(costs[k]);
        }
        'outer: for i in 0..n {
            for j in i + 1..n {
                let mut trial = ordering.clone();
                trial.swap(i, j);
                let mut s = states[i].clone();
                let mut window = Vec::with_capacity(j - i);
                let mut value = head_max[i].max(tail_max[j]);
                for &item in &trial[i..j] {
                    obj.push(&mut s, item);
                    let c = obj.cost(&s);
                    window.push(c);
                    value = value.max(c);
                }
                if value < current {
                    costs[i..j].copy_from_slice(&window);
                    ordering = trial;
                    improved = true;
                    break 'outer;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let value = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (ordering, value)
}

/// Greedy start plus `restarts` seeded random starts, each refined by swap
/// descent. Restart `r` draws from ChaCha8 stream `r` of `seed`.
pub fn heuristic_min<O: PrefixObjective>(obj: &O, options: &SearchOptions) -> SearchOutcome {
    let n = obj.size();
    let starts: Vec<Vec<usize>> = std::iter::once(greedy_ordering(obj))
        .chain((0..options.restarts).map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(r as u64 + 1);
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut rng);
            o
        }))
        .collect();
    let (ordering, value) = starts
        .into_par_iter()
        .map(|start| swap_descent(obj, start, options.max_passes))
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(|a, b| if better((b.1, &b.0), (a.1, &a.0)) { b } else { a })
        .unwrap_or_default();
    SearchOutcome {
        value,
        ordering,
        mode: SearchMode::Heuristic,
        exact: false,
    }
}

/// Exhaustive up to `options.exhaustive_cap` items, heuristic beyond.
pub fn minimize<O: PrefixObjective>(obj: &O, options: &SearchOptions) -> SearchOutcome {
    if obj.size() <= options.exhaustive_cap {
        exhaustive_min(obj)
    } else {
        heuristic_min(obj, options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Prefix cost = |sum of weights in the set|, a toy objective with
    /// a known optimum (alternate signs).
    struct SignedSum(Vec<f64>);

    impl PrefixObjective for SignedSum {
        type State = f64;
        fn size(&self) -> usize {
            self.0.len()
        }
        fn empty(&self) -> f64 {
            0.0
        }
        fn push(&self, s: &mut f64, j: usize) {
            *s += self.0[j];
        }
        fn cost(&self, s: &f64) -> f64 {
            s.abs()
        }
    }

    #[test]
    fn enumeration_counts_and_order() {
        let obj = SignedSum(vec![1.0, -1.0, 2.0]);
        let all = enumerate_all(&obj);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].0, vec![0, 1, 2]);
        assert_eq!(all[0].1, 2.0);
        assert_eq!(all[5].0, vec![2, 1, 0]);
    }

    #[test]
    fn three_searches_agree() {
        let obj = SignedSum(vec![3.0, -1.0, -2.0, 1.5, -1.5, 0.5]);
        let brute = enumerate_all(&obj)
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        let ex = exhaustive_min(&obj);
        let dp = subset_min(&obj);
        assert_eq!(ex.value, brute.1);
        assert_eq!(ex.ordering, brute.0);
        assert_eq!(dp.value, brute.1);
        assert_eq!(dp.ordering, brute.0);
        let h = heuristic_min(&obj, &SearchOptions::default());
        assert!(h.value >= ex.value);
        assert!(!h.exact);
    }

    #[test]
    fn swap_descent_never_worsens() {
        let obj = SignedSum(vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        let (o, v) = swap_descent(&obj, vec![0, 1, 2, 3, 4, 5], 20);
        assert!(v <= 3.0);
        assert_eq!(v, ordering_cost(&obj, &o));
    }

    #[test]
    fn heuristic_is_deterministic() {
        let obj = SignedSum((0..12).map(|i| ((i * 7) % 5) as f64 - 2.0).collect());
        let opts = SearchOptions {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(heuristic_min(&obj, &opts), heuristic_min(&obj, &opts));
    }
}
