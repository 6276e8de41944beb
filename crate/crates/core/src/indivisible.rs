//! FEFx and (1-ε)-FEFx allocations of indivisible goods.
//!
//! Both solvers start with everything in the charity and repeatedly hand an envied
//! subset of the charity to an agent that envies it, returning that agent's old
//! bundle to the charity. Taking a *minimal* envied subset keeps FEFx among the
//! agents after every swap; the loop stops once nobody envies the charity.
//!
//! Searches scan goods in ascending index and, for each good, agents in ascending
//! index; the first hit wins.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::instance::{GoodSet, Instance, IntegralAllocation, Target};
use crate::knapsack::{self, KnapsackQuery, KnapsackSolution};
use crate::rational::{self, Rational};

/// A feasible subset of `target`'s holdings that `agent` values above its own bundle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvyWitness {
    pub agent: usize,
    pub target: Target,
    pub subset: GoodSet,
    pub value: u64,
    pub own_value: u64,
}

impl fmt::Display for EnvyWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let goods: Vec<String> = self.subset.iter().map(|g| (g + 1).to_string()).collect();
        write!(
            f,
            "agent {} (own value {}) envies {{{}}} from the {} holdings (value {})",
            self.agent + 1,
            self.own_value,
            goods.join(", "),
            self.target,
            self.value
        )
    }
}

/// A set taken out of the charity together with the agent that receives it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinimalEnviedSet {
    pub goods: GoodSet,
    pub envier: usize,
}

fn holdings(allocation: &IntegralAllocation, target: Target) -> GoodSet {
    match target {
        Target::Agent(b) => allocation.bundle(b).clone(),
        Target::Charity => allocation.charity(),
    }
}

fn own_value(instance: &Instance, allocation: &IntegralAllocation, agent: usize) -> u64 {
    instance.bundle_value(agent, allocation.bundle(agent))
}

/// `Kns(agent, set)` when it beats the agent's current bundle.
pub fn envies_set(
    instance: &Instance,
    allocation: &IntegralAllocation,
    agent: usize,
    set: &GoodSet,
) -> Option<KnapsackSolution> {
    if set.is_empty() {
        return None;
    }
    let best = knapsack::kns_exact(&KnapsackQuery::for_agent(instance, agent, set));
    (best.value > own_value(instance, allocation, agent)).then_some(best)
}

pub fn envies(
    instance: &Instance,
    allocation: &IntegralAllocation,
    agent: usize,
    target: Target,
) -> Option<EnvyWitness> {
    let set = holdings(allocation, target);
    envies_set(instance, allocation, agent, &set).map(|best| EnvyWitness {
        agent,
        target,
        subset: best.subset,
        value: best.value,
        own_value: own_value(instance, allocation, agent),
    })
}

fn without(set: &GoodSet, g: usize) -> GoodSet {
    let mut s = set.clone();
    s.remove(&g);
    s
}

/// Shrinks `charity` one good at a time while some agent envies what is left.
pub fn find_minimal_envied_subset(
    instance: &Instance,
    allocation: &IntegralAllocation,
    charity: &GoodSet,
) -> Result<MinimalEnviedSet> {
    let n = instance.agents();
    let mut k = (0..n)
        .find(|&a| envies_set(instance, allocation, a, charity).is_some())
        .ok_or_else(|| Error::Precondition("no agent envies the charity".into()))?;
    let mut t = charity.clone();
    'shrink: loop {
        for &g in &t {
            let rest = without(&t, g);
            if let Some(a) = (0..n).find(|&a| envies_set(instance, allocation, a, &rest).is_some()) {
                t = rest;
                k = a;
                continue 'shrink;
            }
        }
        break;
    }
    // A minimal envied set is its envier's own knapsack optimum.
    let value = instance.bundle_value(k, &t);
    if !instance.is_feasible_for(k, &t) || value <= own_value(instance, allocation, k) {
        return Err(Error::Internal(format!(
            "minimal envied set is not feasible and envied for agent {}",
            k + 1
        )));
    }
    Ok(MinimalEnviedSet { goods: t, envier: k })
}

/// One swap: `agent` gives back its bundle and takes `set` from the charity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwapRecord {
    /// 1-based.
    pub iteration: usize,
    pub agent: usize,
    pub set: GoodSet,
    pub value_before: u64,
    pub value_after: u64,
    /// Social welfare after the swap.
    pub welfare: u64,
    /// Allocation the set was selected against.
    pub before: IntegralAllocation,
}

#[derive(Clone, Debug)]
pub struct FefxRun {
    pub allocation: IntegralAllocation,
    pub swaps: Vec<SwapRecord>,
}

fn apply_swap(
    instance: &Instance,
    allocation: &mut IntegralAllocation,
    swaps: &mut Vec<SwapRecord>,
    found: MinimalEnviedSet,
) {
    let k = found.envier;
    let before = allocation.clone();
    let value_before = own_value(instance, allocation, k);
    allocation.set_bundle(k, found.goods.clone());
    swaps.push(SwapRecord {
        iteration: swaps.len() + 1,
        agent: k,
        value_before,
        value_after: own_value(instance, allocation, k),
        welfare: allocation.welfare(instance),
        set: found.goods,
        before,
    });
}

pub fn compute_fefx(instance: &Instance) -> Result<FefxRun> {
    let n = instance.agents();
    let limit = n as u64 * (0..n).map(|a| instance.total_value(a)).max().unwrap_or(0);
    let mut allocation = IntegralAllocation::empty(n, instance.goods());
    let mut swaps = Vec::new();
    loop {
        let charity = allocation.charity();
        if !(0..n).any(|a| envies_set(instance, &allocation, a, &charity).is_some()) {
            break;
        }
        if swaps.len() as u64 >= limit {
            return Err(Error::Internal(format!("more than {limit} swaps")));
        }
        let found = find_minimal_envied_subset(instance, &allocation, &charity)?;
        apply_swap(instance, &mut allocation, &mut swaps, found);
        debug_assert!(
            among_agents_witness(instance, &allocation, &rational::zero()).is_none(),
            "FEFx among agents broken after swap {}",
            swaps.len()
        );
    }
    Ok(FefxRun { allocation, swaps })
}

/// The best feasible strict subset of `set` for `agent`: the maximum of
/// `Kns(agent, set - g)` over `g in set`.
fn best_strict_subset(instance: &Instance, agent: usize, set: &GoodSet) -> Option<KnapsackSolution> {
    let mut best: Option<KnapsackSolution> = None;
    for &g in set {
        let sol = knapsack::kns_exact(&KnapsackQuery::for_agent(instance, agent, &without(set, g)));
        if best.as_ref().is_none_or(|b| sol.value > b.value) {
            best = Some(sol);
        }
    }
    best
}

/// `own >= (1 - eps) * value`, exactly.
fn tolerates(own: u64, value: u64, eps: &Rational) -> bool {
    if eps.is_zero() {
        return own >= value;
    }
    rational::int(own) >= (rational::one() - eps) * rational::int(value)
}

fn witness_over(
    instance: &Instance,
    allocation: &IntegralAllocation,
    eps: &Rational,
    with_charity: bool,
) -> Option<EnvyWitness> {
    let n = instance.agents();
    for a in 0..n {
        let own = own_value(instance, allocation, a);
        for target in Target::all_for(a, n) {
            if target == Target::Charity && !with_charity {
                continue;
            }
            let set = holdings(allocation, target);
            if let Some(best) = best_strict_subset(instance, a, &set) {
                if !tolerates(own, best.value, eps) {
                    return Some(EnvyWitness {
                        agent: a,
                        target,
                        subset: best.subset,
                        value: best.value,
                        own_value: own,
                    });
                }
            }
        }
    }
    None
}

fn among_agents_witness(
    instance: &Instance,
    allocation: &IntegralAllocation,
    eps: &Rational,
) -> Option<EnvyWitness> {
    witness_over(instance, allocation, eps, false)
}

fn check_eps(eps: &Rational, closed_low: bool) -> Result<()> {
    let ok_low = if closed_low { *eps >= rational::zero() } else { *eps > rational::zero() };
    if ok_low && *eps < rational::one() {
        Ok(())
    } else {
        Err(Error::Epsilon {
            value: rational::to_pq(eps),
            range: if closed_low { "[0, 1)" } else { "(0, 1)" },
        })
    }
}

/// First strict-subset envy violation, or `None` when the allocation is FEFx.
/// Infeasible or malformed allocations are errors.
pub fn fefx_witness(instance: &Instance, allocation: &IntegralAllocation) -> Result<Option<EnvyWitness>> {
    allocation.check_feasible(instance)?;
    Ok(witness_over(instance, allocation, &rational::zero(), true))
}

pub fn verify_fefx(instance: &Instance, allocation: &IntegralAllocation) -> Result<bool> {
    Ok(fefx_witness(instance, allocation)?.is_none())
}

/// As [`fefx_witness`] with every comparison relaxed by `(1 - eps)`, `eps in [0, 1)`.
pub fn approx_fefx_witness(
    instance: &Instance,
    allocation: &IntegralAllocation,
    eps: &Rational,
) -> Result<Option<EnvyWitness>> {
    check_eps(eps, true)?;
    allocation.check_feasible(instance)?;
    Ok(witness_over(instance, allocation, eps, true))
}

pub fn verify_approx_fefx(
    instance: &Instance,
    allocation: &IntegralAllocation,
    eps: &Rational,
) -> Result<bool> {
    Ok(approx_fefx_witness(instance, allocation, eps)?.is_none())
}

/// `v_a(A_a) < (1 - eps/2) · v_a(ApxKns(a, set, eps/2))`.
fn apx_envies(
    instance: &Instance,
    allocation: &IntegralAllocation,
    agent: usize,
    set: &GoodSet,
    half: &Rational,
) -> Result<Option<KnapsackSolution>> {
    if set.is_empty() {
        return Ok(None);
    }
    let sol = knapsack::apx_kns(&KnapsackQuery::for_agent(instance, agent, set), half)?;
    let own = own_value(instance, allocation, agent);
    Ok((!tolerates(own, sol.value, half)).then_some(sol))
}

fn first_apx_envier(
    instance: &Instance,
    allocation: &IntegralAllocation,
    set: &GoodSet,
    half: &Rational,
) -> Result<Option<usize>> {
    for a in 0..instance.agents() {
        if apx_envies(instance, allocation, a, set, half)?.is_some() {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// Approximate counterpart of [`find_minimal_envied_subset`], finishing with the
/// trim `T <- ApxKns(k, T, eps/2)`.
pub fn apx_min_envied(
    instance: &Instance,
    allocation: &IntegralAllocation,
    charity: &GoodSet,
    eps: &Rational,
) -> Result<MinimalEnviedSet> {
    if !(*eps > rational::zero() && *eps <= rational::one()) {
        return Err(Error::Epsilon {
            value: rational::to_pq(eps),
            range: "(0, 1]",
        });
    }
    let half = eps / rational::int(2);
    let mut k = first_apx_envier(instance, allocation, charity, &half)?
        .ok_or_else(|| Error::Precondition("no agent (1-ε/2)-envies the charity".into()))?;
    let mut t = charity.clone();
    'shrink: loop {
        for &g in &t {
            let rest = without(&t, g);
            if let Some(a) = first_apx_envier(instance, allocation, &rest, &half)? {
                t = rest;
                k = a;
                continue 'shrink;
            }
        }
        break;
    }
    let trimmed = knapsack::apx_kns(&KnapsackQuery::for_agent(instance, k, &t), &half)?;
    if tolerates(own_value(instance, allocation, k), trimmed.value, &half) {
        return Err(Error::Internal(format!(
            "trimmed set is not (1-ε/2)-envied by agent {}",
            k + 1
        )));
    }
    Ok(MinimalEnviedSet {
        goods: trimmed.subset,
        envier: k,
    })
}

/// Upper bound on how often `agent`'s bundle changes in [`compute_approx_fefx`]:
/// `floor(log_r(v_a([m]) / min_g v_a(g))) + 1` with `r = 1/(1 - eps/2)` and the
/// minimum over goods of positive value. Zero when the agent values nothing.
pub fn max_updates(instance: &Instance, agent: usize, eps: &Rational) -> u64 {
    let Some(min) = (0..instance.goods())
        .map(|g| instance.value(agent, g))
        .filter(|&v| v > 0)
        .min()
    else {
        return 0;
    };
    let ratio = rational::int(instance.total_value(agent)) / rational::int(min);
    let r = (rational::one() - eps / rational::int(2)).recip();
    let mut power = Rational::one();
    let mut floor_log = 0;
    loop {
        power *= &r;
        if power > ratio {
            break;
        }
        floor_log += 1;
    }
    floor_log + 1
}

pub fn compute_approx_fefx(instance: &Instance, eps: &Rational) -> Result<FefxRun> {
    check_eps(eps, false)?;
    let n = instance.agents();
    let half = eps / rational::int(2);
    let limit: u64 = (0..n).map(|a| max_updates(instance, a, eps)).sum();
    let mut allocation = IntegralAllocation::empty(n, instance.goods());
    let mut swaps = Vec::new();
    loop {
        let charity = allocation.charity();
        if first_apx_envier(instance, &allocation, &charity, &half)?.is_none() {
            break;
        }
        if swaps.len() as u64 >= limit {
            return Err(Error::Internal(format!("more than {limit} swaps")));
        }
        let found = apx_min_envied(instance, &allocation, &charity, eps)?;
        apply_swap(instance, &mut allocation, &mut swaps, found);
        debug_assert!(
            among_agents_witness(instance, &allocation, eps).is_none(),
            "(1-ε)-FEFx among agents broken after swap {}",
            swaps.len()
        );
    }
    Ok(FefxRun { allocation, swaps })
}
