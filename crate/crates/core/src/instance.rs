//! Instances, density orderings and allocations.
//!
//! Agents and goods are 0-indexed everywhere inside the crate. The file formats in
//! [`crate::format`] convert to and from the 1-based numbering users see.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// A set of (0-based) good indices.
pub type GoodSet = BTreeSet<usize>;

/// Agents with integral values and sizes per good, plus a budget each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    m: usize,
    values: Vec<Vec<u64>>,
    sizes: Vec<Vec<u64>>,
    budgets: Vec<u64>,
}

impl Instance {
    /// Validates dimensions and budgets. Zero sizes are accepted here; the divisible
    /// pipeline rejects them separately (see [`Instance::require_positive_sizes`]).
    pub fn new(values: Vec<Vec<u64>>, sizes: Vec<Vec<u64>>, budgets: Vec<u64>) -> Result<Self> {
        let n = budgets.len();
        if n == 0 {
            return Err(Error::InvalidInstance("at least one agent is required".into()));
        }
        if values.len() != n || sizes.len() != n {
            return Err(Error::InvalidInstance(format!(
                "expected {n} rows of values and sizes, got {} and {}",
                values.len(),
                sizes.len()
            )));
        }
        let m = values[0].len();
        if m == 0 {
            return Err(Error::InvalidInstance("at least one good is required".into()));
        }
        for a in 0..n {
            if values[a].len() != m || sizes[a].len() != m {
                return Err(Error::InvalidInstance(format!(
                    "agent {} has {} values and {} sizes, expected {m}",
                    a + 1,
                    values[a].len(),
                    sizes[a].len()
                )));
            }
            if budgets[a] == 0 {
                return Err(Error::InvalidInstance(format!(
                    "agent {} has budget 0; budgets must be at least 1",
                    a + 1
                )));
            }
        }
        Ok(Self {
            n,
            m,
            values,
            sizes,
            budgets,
        })
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn goods(&self) -> usize {
        self.m
    }

    pub fn value(&self, agent: usize, good: usize) -> u64 {
        self.values[agent][good]
    }

    pub fn size(&self, agent: usize, good: usize) -> u64 {
        self.sizes[agent][good]
    }

    pub fn budget(&self, agent: usize) -> u64 {
        self.budgets[agent]
    }

    pub fn values(&self) -> &[Vec<u64>] {
        &self.values
    }

    pub fn sizes(&self) -> &[Vec<u64>] {
        &self.sizes
    }

    pub fn budgets(&self) -> &[u64] {
        &self.budgets
    }

    pub fn max_budget(&self) -> u64 {
        self.budgets.iter().copied().max().unwrap_or(0)
    }

    pub fn bundle_value(&self, agent: usize, set: &GoodSet) -> u64 {
        set.iter().map(|&g| self.values[agent][g]).sum()
    }

    pub fn bundle_size(&self, agent: usize, set: &GoodSet) -> u64 {
        set.iter().map(|&g| self.sizes[agent][g]).sum()
    }

    pub fn is_feasible_for(&self, agent: usize, set: &GoodSet) -> bool {
        self.bundle_size(agent, set) <= self.budgets[agent]
    }

    /// `v_a([m])`.
    pub fn total_value(&self, agent: usize) -> u64 {
        self.values[agent].iter().sum()
    }

    pub fn fractional_value(&self, agent: usize, row: &[Rational]) -> Rational {
        weighted_sum(&self.values[agent], row)
    }

    pub fn fractional_size(&self, agent: usize, row: &[Rational]) -> Rational {
        weighted_sum(&self.sizes[agent], row)
    }

    pub fn require_positive_sizes(&self) -> Result<()> {
        for a in 0..self.n {
            if let Some(g) = self.sizes[a].iter().position(|&s| s == 0) {
                return Err(Error::ZeroSize {
                    agent: a + 1,
                    good: g + 1,
                });
            }
        }
        Ok(())
    }

    /// Goods in decreasing density for `agent`, ties by ascending index.
    ///
    /// Zero-value goods are skipped when `skip_worthless` is set, which lets callers
    /// with zero sizes (infinite or undefined density) still get a total order.
    pub(crate) fn goods_by_density(&self, agent: usize, skip_worthless: bool) -> Vec<usize> {
        let vals = &self.values[agent];
        let sizes = &self.sizes[agent];
        let mut order: Vec<usize> = (0..self.m)
            .filter(|&g| !skip_worthless || vals[g] > 0)
            .collect();
        order.sort_by(|&g, &h| denser(vals[g], sizes[g], vals[h], sizes[h]).then(g.cmp(&h)));
        order
    }
}

/// Orders by decreasing `value/size` using exact cross-multiplication.
fn denser(vg: u64, sg: u64, vh: u64, sh: u64) -> Ordering {
    let lhs = vg as u128 * sh as u128;
    let rhs = vh as u128 * sg as u128;
    rhs.cmp(&lhs)
}

fn weighted_sum(weights: &[u64], row: &[Rational]) -> Rational {
    row.iter()
        .zip(weights)
        .filter(|(x, _)| !x.is_zero())
        .map(|(x, &w)| x * rational::int(w))
        .fold(rational::zero(), |acc, t| acc + t)
}

/// An instance with the zero-value fictional good appended as index `m`.
///
/// The fictional good has size `2 n max_b B_b` for every agent, which exceeds every
/// budget, so any agent can pad its bundle up to its budget with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentedInstance {
    base: Instance,
    fictional_size: u64,
    orderings: Vec<Vec<usize>>,
}

/// Appends the fictional good. Rejects instances with a zero size.
pub fn augment(instance: &Instance) -> Result<AugmentedInstance> {
    instance.require_positive_sizes()?;
    let fictional_size = 2 * instance.n as u64 * instance.max_budget();
    let mut aug = AugmentedInstance {
        base: instance.clone(),
        fictional_size,
        orderings: Vec::new(),
    };
    aug.orderings = (0..instance.n).map(|a| aug.compute_ordering(a)).collect();
    Ok(aug)
}

impl AugmentedInstance {
    pub fn base(&self) -> &Instance {
        &self.base
    }

    pub fn agents(&self) -> usize {
        self.base.n
    }

    /// Goods including the fictional one, i.e. `m + 1`.
    pub fn goods(&self) -> usize {
        self.base.m + 1
    }

    pub fn fictional(&self) -> usize {
        self.base.m
    }

    pub fn fictional_size(&self) -> u64 {
        self.fictional_size
    }

    pub fn value(&self, agent: usize, good: usize) -> u64 {
        if good == self.base.m {
            0
        } else {
            self.base.value(agent, good)
        }
    }

    pub fn size(&self, agent: usize, good: usize) -> u64 {
        if good == self.base.m {
            self.fictional_size
        } else {
            self.base.size(agent, good)
        }
    }

    pub fn budget(&self, agent: usize) -> u64 {
        self.base.budget(agent)
    }

    /// `π_a` as 0-based good indices: position `t` holds the `(t+1)`-th densest good.
    pub fn density_ordering(&self, agent: usize) -> &[usize] {
        &self.orderings[agent]
    }

    fn compute_ordering(&self, agent: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.goods()).collect();
        order.sort_by(|&g, &h| {
            denser(
                self.value(agent, g),
                self.size(agent, g),
                self.value(agent, h),
                self.size(agent, h),
            )
            .then(g.cmp(&h))
        });
        order
    }

    /// True when `g` may directly precede `h` in `π_a`: strictly denser, or equally
    /// dense with a smaller index.
    pub fn ordered_pair(&self, agent: usize, g: usize, h: usize) -> bool {
        match denser(
            self.value(agent, g),
            self.size(agent, g),
            self.value(agent, h),
            self.size(agent, h),
        ) {
            Ordering::Less => true,
            Ordering::Equal => g < h,
            Ordering::Greater => false,
        }
    }
}

/// Fractional assignment: `x[a][g]` is the share of good `g` held by agent `a`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractionalAllocation {
    x: Vec<Vec<Rational>>,
}

impl FractionalAllocation {
    /// Checks a non-empty rectangular matrix with entries and column sums in `[0, 1]`.
    pub fn new(x: Vec<Vec<Rational>>) -> Result<Self> {
        let Some(first) = x.first() else {
            return Err(Error::Dimension("allocation has no rows".into()));
        };
        let cols = first.len();
        for (a, row) in x.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {cols}",
                    a + 1,
                    row.len()
                )));
            }
            for (g, v) in row.iter().enumerate() {
                if !rational::in_unit_interval(v) {
                    return Err(Error::FractionRange(format!(
                        "x[{}][{}] = {v} is outside [0, 1]",
                        a + 1,
                        g + 1
                    )));
                }
            }
        }
        let alloc = Self { x };
        for (g, c) in alloc.charity().iter().enumerate() {
            if !rational::in_unit_interval(c) {
                return Err(Error::FractionRange(format!(
                    "good {} is over-assigned: charity share {c}",
                    g + 1
                )));
            }
        }
        Ok(alloc)
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![vec![rational::zero(); m]; n],
        }
    }

    pub fn agents(&self) -> usize {
        self.x.len()
    }

    pub fn goods(&self) -> usize {
        self.x[0].len()
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.x[agent]
    }

    pub fn get(&self, agent: usize, good: usize) -> &Rational {
        &self.x[agent][good]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.x
    }

    /// `1 - Σ_a x[a][g]` per good.
    pub fn charity(&self) -> Vec<Rational> {
        (0..self.goods())
            .map(|g| {
                self.x
                    .iter()
                    .fold(rational::one(), |acc, row| acc - &row[g])
            })
            .collect()
    }

    /// Checks dimensions against `instance` and every agent's budget.
    pub fn check_feasible(&self, instance: &Instance) -> Result<()> {
        if self.agents() != instance.agents() || self.goods() != instance.goods() {
            return Err(Error::Dimension(format!(
                "allocation is {}x{}, instance is {}x{}",
                self.agents(),
                self.goods(),
                instance.agents(),
                instance.goods()
            )));
        }
        for a in 0..self.agents() {
            let size = instance.fractional_size(a, &self.x[a]);
            if size > rational::int(instance.budget(a)) {
                return Err(Error::OverBudget {
                    agent: a + 1,
                    size: rational::to_pq(&size),
                    budget: instance.budget(a),
                });
            }
        }
        Ok(())
    }
}

/// Drops the fictional column `m` of an allocation over the augmented instance.
pub fn strip_fictional(allocation: &FractionalAllocation) -> FractionalAllocation {
    let m = allocation.goods() - 1;
    FractionalAllocation {
        x: allocation
            .x
            .iter()
            .map(|row| row[..m].to_vec())
            .collect(),
    }
}

/// Pairwise disjoint integral bundles; everything else is charity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralAllocation {
    m: usize,
    bundles: Vec<GoodSet>,
}

impl IntegralAllocation {
    pub fn new(m: usize, bundles: Vec<GoodSet>) -> Result<Self> {
        let mut seen = GoodSet::new();
        for b in &bundles {
            for &g in b {
                if g >= m {
                    return Err(Error::Bundles(format!("good {} does not exist", g + 1)));
                }
                if !seen.insert(g) {
                    return Err(Error::Bundles(format!("good {} assigned twice", g + 1)));
                }
            }
        }
        Ok(Self { m, bundles })
    }

    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            m,
            bundles: vec![GoodSet::new(); n],
        }
    }

    pub fn agents(&self) -> usize {
        self.bundles.len()
    }

    pub fn goods(&self) -> usize {
        self.m
    }

    pub fn bundle(&self, agent: usize) -> &GoodSet {
        &self.bundles[agent]
    }

    pub fn bundles(&self) -> &[GoodSet] {
        &self.bundles
    }

    /// Replaces `agent`'s bundle; the old bundle returns to the charity.
    pub fn set_bundle(&mut self, agent: usize, set: GoodSet) {
        self.bundles[agent] = set;
    }

    pub fn charity(&self) -> GoodSet {
        let taken: GoodSet = self.bundles.iter().flatten().copied().collect();
        (0..self.m).filter(|g| !taken.contains(g)).collect()
    }

    pub fn welfare(&self, instance: &Instance) -> u64 {
        (0..self.agents())
            .map(|a| instance.bundle_value(a, &self.bundles[a]))
            .sum()
    }

    pub fn check_feasible(&self, instance: &Instance) -> Result<()> {
        if self.agents() != instance.agents() || self.m != instance.goods() {
            return Err(Error::Dimension(format!(
                "allocation has {} bundles over {} goods, instance has {} agents and {} goods",
                self.agents(),
                self.m,
                instance.agents(),
                instance.goods()
            )));
        }
        for a in 0..self.agents() {
            let size = instance.bundle_size(a, &self.bundles[a]);
            if size > instance.budget(a) {
                return Err(Error::OverBudget {
                    agent: a + 1,
                    size: size.to_string(),
                    budget: instance.budget(a),
                });
            }
        }
        Ok(())
    }
}

/// Whose holdings an envy comparison looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Agent(usize),
    Charity,
}

impl Target {
    /// Every target agent `a` compares against: the other agents ascending, then
    /// the charity.
    pub fn all_for(agent: usize, n: usize) -> impl Iterator<Item = Target> {
        (0..n)
            .filter(move |&b| b != agent)
            .map(Target::Agent)
            .chain(std::iter::once(Target::Charity))
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Agent(b) => write!(f, "agent {}", b + 1),
            Target::Charity => f.write_str("charity"),
        }
    }
}
