//! Knapsack oracles over one agent's sizes and values.
//!
//! * [`kns_exact`]: weight-indexed dynamic program, `O(|T| · B)`.
//! * [`apx_kns`]: value-scaling FPTAS, value at least `(1 - ε)` of the optimum.
//! * [`kns_brute`]: exhaustive enumeration, used as a testing oracle.
//!
//! Zero-weight items with positive value are always taken and zero-weight worthless
//! items never are, before either dynamic program runs. Backtracking prefers to
//! leave an item out whenever that keeps the optimum, so returned subsets are
//! deterministic.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::instance::{GoodSet, Instance};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Item {
    pub good: usize,
    pub weight: u64,
    pub value: u64,
}

/// Items `T` with one agent's weights and values, and that agent's budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackQuery {
    pub items: Vec<Item>,
    pub capacity: u64,
}

impl KnapsackQuery {
    pub fn new(items: Vec<Item>, capacity: u64) -> Self {
        Self { items, capacity }
    }

    /// The query `Kns(agent, set)`.
    pub fn for_agent(instance: &Instance, agent: usize, set: &GoodSet) -> Self {
        let items = set
            .iter()
            .map(|&g| Item {
                good: g,
                weight: instance.size(agent, g),
                value: instance.value(agent, g),
            })
            .collect();
        Self {
            items,
            capacity: instance.budget(agent),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnapsackSolution {
    pub subset: GoodSet,
    pub value: u64,
    pub weight: u64,
}

impl KnapsackSolution {
    fn from_items<'a>(items: impl IntoIterator<Item = &'a Item>) -> Self {
        let mut sol = Self::default();
        for it in items {
            sol.subset.insert(it.good);
            sol.value += it.value;
            sol.weight += it.weight;
        }
        sol
    }
}

/// Splits items into those always taken (weight 0, value > 0) and the ones the
/// dynamic programs decide on; items that can never help are dropped.
fn preprocess(q: &KnapsackQuery) -> (Vec<Item>, Vec<Item>) {
    let mut forced = Vec::new();
    let mut open = Vec::new();
    for it in &q.items {
        if it.weight == 0 {
            if it.value > 0 {
                forced.push(*it);
            }
        } else if it.value > 0 && it.weight <= q.capacity {
            open.push(*it);
        }
    }
    (forced, open)
}

pub fn kns_exact(q: &KnapsackQuery) -> KnapsackSolution {
    let (forced, open) = preprocess(q);
    let total_weight: u64 = open.iter().map(|it| it.weight).sum();
    let cap = q.capacity.min(total_weight) as usize;

    // best[i][w]: max value using the first i open items within weight w.
    let mut best = vec![vec![0u64; cap + 1]; open.len() + 1];
    for (i, it) in open.iter().enumerate() {
        let wt = it.weight as usize;
        for w in 0..=cap {
            let skip = best[i][w];
            let take = if wt <= w { best[i][w - wt] + it.value } else { 0 };
            best[i + 1][w] = skip.max(take);
        }
    }

    let mut chosen = Vec::new();
    let mut w = cap;
    for i in (0..open.len()).rev() {
        if best[i + 1][w] != best[i][w] {
            chosen.push(open[i]);
            w -= open[i].weight as usize;
        }
    }
    KnapsackSolution::from_items(forced.iter().chain(chosen.iter()))
}

/// Exhaustive search over all `2^|T|` subsets, `|T| <= 20`.
pub fn kns_brute(q: &KnapsackQuery) -> Result<KnapsackSolution> {
    let k = q.items.len();
    if k > 20 {
        return Err(Error::BruteForceLimit(k));
    }
    let mut best = KnapsackSolution::default();
    for mask in 0u32..(1u32 << k) {
        let picked = q
            .items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, it)| it);
        let sol = KnapsackSolution::from_items(picked);
        if sol.weight <= q.capacity && sol.value > best.value {
            best = sol;
        }
    }
    Ok(best)
}

/// FPTAS with scale factor `K = ε · v_max / |T'|` (raised to 1 when smaller), where
/// `T'` are the items the dynamic program decides on.
pub fn apx_kns(q: &KnapsackQuery, eps: &Rational) -> Result<KnapsackSolution> {
    if !eps.is_positive() || *eps > rational::one() {
        return Err(Error::Epsilon {
            value: rational::to_pq(eps),
            range: "(0, 1]",
        });
    }
    let (forced, open) = preprocess(q);
    if open.is_empty() {
        return Ok(KnapsackSolution::from_items(&forced));
    }
    let vmax = open.iter().map(|it| it.value).max().unwrap();
    let mut scale = eps * rational::int(vmax) / rational::int(open.len() as u64);
    if scale < rational::one() {
        scale = rational::one();
    }
    let scaled: Vec<usize> = open
        .iter()
        .map(|it| {
            let s: BigInt = (rational::int(it.value) / &scale).floor().to_integer();
            usize::try_from(s).expect("scaled value fits in usize")
        })
        .collect();
    let total: usize = scaled.iter().sum();

    // lightest[i][p]: min weight reaching scaled value exactly p with the first i items.
    let inf = u64::MAX;
    let mut lightest = vec![vec![inf; total + 1]; open.len() + 1];
    lightest[0][0] = 0;
    for (i, it) in open.iter().enumerate() {
        let p_i = scaled[i];
        for p in 0..=total {
            let skip = lightest[i][p];
            let take = if p >= p_i && lightest[i][p - p_i] != inf {
                lightest[i][p - p_i] + it.weight
            } else {
                inf
            };
            lightest[i + 1][p] = skip.min(take);
        }
    }
    let n = open.len();
    let target = (0..=total)
        .rev()
        .find(|&p| lightest[n][p] <= q.capacity)
        .unwrap_or(0);

    let mut chosen = Vec::new();
    let mut p = target;
    for i in (0..n).rev() {
        if lightest[i + 1][p] != lightest[i][p] {
            chosen.push(open[i]);
            p -= scaled[i];
        }
    }
    debug_assert!(p.is_zero());
    Ok(KnapsackSolution::from_items(forced.iter().chain(chosen.iter())))
}
