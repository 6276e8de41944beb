//! Knapsack through an FEFx oracle, and two fixed instances.
//!
//! For a knapsack instance with even values, the single-agent gadget `F(μ)` adds
//! a good worth `2μ + 1` that fills the whole capacity and a worthless good that
//! never fits. Any FEFx allocation of `F(μ)` gives the agent a bundle of odd value
//! exactly when `2μ >= v*`, so a binary search over `μ` recovers the optimum `v*`.

use num_traits::One;

use crate::error::{Error, Result};
use crate::indivisible;
use crate::instance::{FractionalAllocation, GoodSet, Instance, IntegralAllocation};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackProblem {
    weights: Vec<u64>,
    values: Vec<u64>,
    capacity: u64,
}

impl KnapsackProblem {
    /// The capacity must be positive: it becomes the gadget agent's budget.
    pub fn new(weights: Vec<u64>, values: Vec<u64>, capacity: u64) -> Result<Self> {
        if weights.len() != values.len() {
            return Err(Error::InvalidInstance(format!(
                "{} weights but {} values",
                weights.len(),
                values.len()
            )));
        }
        if capacity == 0 {
            return Err(Error::InvalidInstance("knapsack capacity must be at least 1".into()));
        }
        Ok(Self {
            weights,
            values,
            capacity,
        })
    }

    pub fn items(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn total_value(&self) -> u64 {
        self.values.iter().sum()
    }

    pub fn has_even_values(&self) -> bool {
        self.values.iter().all(|v| v % 2 == 0)
    }

    pub fn doubled(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| 2 * v).collect(),
            ..self.clone()
        }
    }
}

/// `F(μ)`: one agent with budget `W`, the items as goods `1..=m`, then a good of
/// value `2μ + 1` and size `W`, then a good of value 0 and size `W + 1`.
pub fn build_gadget(kp: &KnapsackProblem, mu: u64) -> Result<Instance> {
    if !kp.has_even_values() {
        return Err(Error::Precondition("gadget needs even item values".into()));
    }
    let w = kp.capacity;
    let mut values = kp.values.clone();
    values.extend([2 * mu + 1, 0]);
    let mut sizes = kp.weights.clone();
    sizes.extend([w, w + 1]);
    Instance::new(vec![values], vec![sizes], vec![w])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Probe {
    pub mu: u64,
    pub bundle: GoodSet,
    pub value: u64,
    pub parity: Parity,
}

fn probe<F>(kp: &KnapsackProblem, mu: u64, solver: &mut F) -> Result<Probe>
where
    F: FnMut(&Instance) -> Result<IntegralAllocation>,
{
    let gadget = build_gadget(kp, mu)?;
    let allocation = solver(&gadget)?;
    allocation.check_feasible(&gadget)?;
    let bundle = allocation.bundle(0).clone();
    let value = gadget.bundle_value(0, &bundle);
    let parity = if value % 2 == 0 { Parity::Even } else { Parity::Odd };
    Ok(Probe {
        mu,
        bundle,
        value,
        parity,
    })
}

/// Parity of the agent's value in the allocation `solver` returns for `F(μ)`.
pub fn parity_probe<F>(kp: &KnapsackProblem, mu: u64, mut solver: F) -> Result<Parity>
where
    F: FnMut(&Instance) -> Result<IntegralAllocation>,
{
    Ok(probe(kp, mu, &mut solver)?.parity)
}

/// The exact FEFx solver as a probe oracle.
pub fn fefx_oracle(instance: &Instance) -> Result<IntegralAllocation> {
    Ok(indivisible::compute_fefx(instance)?.allocation)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackReduction {
    /// `v*` in the units of the input problem.
    pub optimum: u64,
    /// Smallest `μ` with an odd probe, over the (possibly doubled) problem.
    pub mu_star: u64,
    /// Whether item values were doubled to make them even.
    pub doubled: bool,
    /// Total value of the weight-0 items, which sit in every optimum and are
    /// left out of the gadgets.
    pub free_value: u64,
    pub probes: Vec<Probe>,
}

/// Binary search over `μ in [0, Σ v_j]` for the smallest odd probe. Odd values are
/// doubled first and the optimum halved again. Weight-0 items would fit next to
/// the big gadget good and break the parity argument, so they are set aside and
/// their value added back.
pub fn solve_knapsack_via_fefx<F>(kp: &KnapsackProblem, mut solver: F) -> Result<KnapsackReduction>
where
    F: FnMut(&Instance) -> Result<IntegralAllocation>,
{
    let (free, kept): (Vec<usize>, Vec<usize>) = (0..kp.items()).partition(|&j| kp.weights[j] == 0);
    let free_value = free.iter().map(|&j| kp.values[j]).sum::<u64>();
    let kp = KnapsackProblem {
        weights: kept.iter().map(|&j| kp.weights[j]).collect(),
        values: kept.iter().map(|&j| kp.values[j]).collect(),
        capacity: kp.capacity,
    };
    let doubled = !kp.has_even_values();
    let kp = if doubled { kp.doubled() } else { kp };
    let mut probes = Vec::new();
    let (mut lo, mut hi) = (0, kp.total_value());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let p = probe(&kp, mid, &mut solver)?;
        let odd = p.parity == Parity::Odd;
        probes.push(p);
        if odd {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if !probes.iter().any(|p| p.mu == lo) {
        let p = probe(&kp, lo, &mut solver)?;
        let odd = p.parity == Parity::Odd;
        probes.push(p);
        if !odd {
            return Err(Error::Internal(format!("probe at μ = {lo} is even")));
        }
    }
    let optimum = if doubled { lo } else { 2 * lo } + free_value;
    Ok(KnapsackReduction {
        optimum,
        mu_star: lo,
        doubled,
        free_value,
        probes,
    })
}

/// Two agents, two goods, both budgets 1. In the original units agent 1 has
/// values (1, 1/2) and sizes (1, 1), agent 2 values (1, 1/2) and sizes (1, 8).
/// Values are stored doubled so they are integral.
#[derive(Clone, Debug)]
pub struct MnwFixture {
    pub instance: Instance,
    /// The Nash-welfare maximizing allocation.
    pub allocation: FractionalAllocation,
    /// Per-agent factor the original values were multiplied by.
    pub value_scale: Vec<u64>,
}

impl MnwFixture {
    /// Converts a value of `agent` back to the original units.
    pub fn original_units(&self, agent: usize, value: &Rational) -> Rational {
        value / rational::int(self.value_scale[agent])
    }
}

/// The Nash-optimal allocation of the fixture as a function of `δ`, the ratio of
/// agent 2's sizes: `x_11 = δ / (2(2 - δ))`, agent 1 fills its budget with good 2,
/// agent 2 takes the rest of good 1 and pads with good 2.
pub fn mnw_closed_form(delta: &Rational) -> Vec<Vec<Rational>> {
    let one = Rational::one();
    let two = rational::int(2);
    let x11 = delta / (&two * (&two - delta));
    let x12 = &one - &x11;
    let x21 = &one - &x11;
    let x22 = delta * (&one - &x21);
    vec![vec![x11, x12], vec![x21, x22]]
}

pub fn mnw_fixture() -> MnwFixture {
    let instance = Instance::new(
        vec![vec![2, 1], vec![2, 1]],
        vec![vec![1, 1], vec![1, 8]],
        vec![1, 1],
    )
    .expect("fixture is valid");
    let allocation = FractionalAllocation::new(mnw_closed_form(&rational::ratio(1, 8)))
        .expect("fixture allocation is in range");
    MnwFixture {
        instance,
        allocation,
        value_scale: vec![2, 2],
    }
}

/// One good of value 1 and size 0 for two agents with budget 1. No allocation of
/// it is FEF: whoever misses out envies the holder (or the charity).
pub fn single_good_fixture() -> Instance {
    Instance::new(vec![vec![1], vec![1]], vec![vec![0], vec![0]], vec![1, 1])
        .expect("fixture is valid")
}
