//! FEF allocations of divisible goods.
//!
//! [`divisible_fef`] walks threshold vectors `τ` upward from `(1, …, 1)`. At each
//! step it asks whether `LP1(τ)` (density domination with binding budgets) is
//! feasible; if not, it raises the first coordinate `k` for which the relaxation
//! `LP2(τ + e_k)` stays feasible. A feasible point of `LP1` is density dominating
//! and therefore FEF once the fictional good is dropped.
//!
//! LP variables are laid out row-major: `z[a][g]` is variable `a * (m + 1) + g`.

use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::instance::{self, AugmentedInstance, FractionalAllocation, GoodSet, Instance, Target};
use crate::rational::{self, Rational};
use crate::ratlp::{self, FeasibilityResult, LinearProgram, Relation};

/// Per-agent thresholds, stored 1-based: `1 <= τ_a <= m + 2` where `m` counts the
/// real goods.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ThresholdVector {
    tau: Vec<usize>,
}

impl ThresholdVector {
    pub fn ones(n: usize) -> Self {
        Self { tau: vec![1; n] }
    }

    /// `m` is the number of real goods.
    pub fn new(tau: Vec<usize>, m: usize) -> Result<Self> {
        if let Some(a) = tau.iter().position(|&t| t < 1 || t > m + 2) {
            return Err(Error::Precondition(format!(
                "threshold {} of agent {} outside [1, {}]",
                tau[a],
                a + 1,
                m + 2
            )));
        }
        Ok(Self { tau })
    }

    pub fn get(&self, agent: usize) -> usize {
        self.tau[agent]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.tau
    }

    pub fn bumped(&self, agent: usize) -> Self {
        let mut tau = self.tau.clone();
        tau[agent] += 1;
        Self { tau }
    }

    pub fn max_norm(&self) -> usize {
        self.tau.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for ThresholdVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.tau.iter().map(|t| t.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `I_a(τ)`: the `τ_a - 1` densest goods; `E_a(τ)`: the `τ_a`-th densest, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InternalEdgeSets {
    pub internal: Vec<GoodSet>,
    pub edge: Vec<Option<usize>>,
}

impl InternalEdgeSets {
    /// `I(τ)`.
    pub fn all_internal(&self) -> GoodSet {
        self.internal.iter().flatten().copied().collect()
    }

    /// `E(τ)`.
    pub fn all_edge(&self) -> GoodSet {
        self.edge.iter().flatten().copied().collect()
    }

    /// `I_a(τ) ∪ E_a(τ)`.
    pub fn support(&self, agent: usize) -> GoodSet {
        let mut s = self.internal[agent].clone();
        s.extend(self.edge[agent]);
        s
    }
}

pub fn internal_edge(aug: &AugmentedInstance, tau: &ThresholdVector) -> InternalEdgeSets {
    let mut internal = Vec::with_capacity(aug.agents());
    let mut edge = Vec::with_capacity(aug.agents());
    for a in 0..aug.agents() {
        let order = aug.density_ordering(a);
        let t = tau.get(a);
        internal.push(order[..t - 1].iter().copied().collect());
        edge.push(order.get(t - 1).copied());
    }
    InternalEdgeSets { internal, edge }
}

fn var(aug: &AugmentedInstance, agent: usize, good: usize) -> usize {
    agent * aug.goods() + good
}

fn build_lp(aug: &AugmentedInstance, tau: &ThresholdVector, budget: Relation) -> LinearProgram {
    let n = aug.agents();
    let goods = aug.goods();
    let sets = internal_edge(aug, tau);
    let all_internal = sets.all_internal();
    let one = rational::one;

    let mut lp = LinearProgram::unit_box(n * goods);
    for a in 0..n {
        for g in 0..goods {
            lp.set_name(var(aug, a, g), format!("z[{},{}]", a + 1, g + 1));
        }
    }

    // Dominance on internal goods.
    for a in 0..n {
        for &g in &sets.internal[a] {
            for b in (0..n).filter(|&b| b != a) {
                lp.add_ge(
                    vec![(var(aug, a, g), one()), (var(aug, b, g), -one())],
                    rational::zero(),
                );
            }
        }
    }
    // Budgets over I_a ∪ E_a.
    for a in 0..n {
        let coeffs = sets
            .support(a)
            .iter()
            .map(|&g| (var(aug, a, g), rational::int(aug.size(a, g))))
            .collect();
        lp.push(coeffs, budget, rational::int(aug.budget(a)));
    }
    // Internal goods are fully assigned.
    for &g in &all_internal {
        lp.add_eq((0..n).map(|a| (var(aug, a, g), one())).collect(), one());
    }
    // Nothing outside I_a ∪ E_a.
    for a in 0..n {
        let support = sets.support(a);
        for h in (0..goods).filter(|h| !support.contains(h)) {
            lp.add_eq(vec![(var(aug, a, h), one())], rational::zero());
        }
    }
    // Supply of the remaining goods.
    for h in (0..goods).filter(|h| !all_internal.contains(h)) {
        lp.add_le((0..n).map(|a| (var(aug, a, h), one())).collect(), one());
    }
    lp
}

/// `LP1(τ)`: density domination with every budget binding.
pub fn build_lp1(aug: &AugmentedInstance, tau: &ThresholdVector) -> LinearProgram {
    build_lp(aug, tau, Relation::Eq)
}

/// `LP2(τ)`: `LP1(τ)` with budgets relaxed to `<=`.
pub fn build_lp2(aug: &AugmentedInstance, tau: &ThresholdVector) -> LinearProgram {
    build_lp(aug, tau, Relation::Le)
}

/// One pass of the threshold loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationRecord {
    pub tau: ThresholdVector,
    /// Feasibility of `LP2(τ)` at the start of the iteration (known from the
    /// previous step, or solved once for the initial vector).
    pub lp2_feasible: bool,
    pub lp1_feasible: bool,
    /// Agent whose threshold was raised, when `LP1(τ)` was infeasible.
    pub raised: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct DivisibleOutcome {
    /// The FEF allocation over the real goods.
    pub allocation: FractionalAllocation,
    /// The `LP1(τ*)` point, including the fictional column.
    pub augmented_allocation: FractionalAllocation,
    pub augmented: AugmentedInstance,
    pub tau: ThresholdVector,
    pub trace: Vec<IterationRecord>,
}

impl DivisibleOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

fn point_to_allocation(aug: &AugmentedInstance, point: &[Rational]) -> Result<FractionalAllocation> {
    let rows = point.chunks(aug.goods()).map(|r| r.to_vec()).collect();
    FractionalAllocation::new(rows)
}

/// Computes an FEF allocation. Requires every size to be positive.
pub fn divisible_fef(instance: &Instance) -> Result<DivisibleOutcome> {
    let aug = instance::augment(instance)?;
    let n = aug.agents();
    let m = instance.goods();
    let limit = n * (m + 1);

    let mut tau = ThresholdVector::ones(n);
    let mut lp2_feasible = ratlp::feasible(&build_lp2(&aug, &tau))?.is_feasible();
    let mut trace = Vec::new();

    loop {
        debug_assert!(lp2_feasible, "LP2{tau} infeasible at loop start");
        if trace.len() >= limit {
            return Err(Error::Internal(format!(
                "threshold loop exceeded {limit} iterations at τ = {tau}"
            )));
        }
        let mut record = IterationRecord {
            tau: tau.clone(),
            lp2_feasible,
            lp1_feasible: false,
            raised: None,
        };

        if let FeasibilityResult::Feasible(point) = ratlp::feasible(&build_lp1(&aug, &tau))? {
            record.lp1_feasible = true;
            trace.push(record);
            let augmented_allocation = point_to_allocation(&aug, &point)?;
            let allocation = instance::strip_fictional(&augmented_allocation);
            if !check_density_domination(&aug, &augmented_allocation, &tau) {
                return Err(Error::Internal(format!(
                    "LP1 point at τ = {tau} is not density dominating"
                )));
            }
            if let Some(w) = fef_witness(instance, &allocation)? {
                return Err(Error::Internal(format!("output is not FEF: {w}")));
            }
            return Ok(DivisibleOutcome {
                allocation,
                augmented_allocation,
                augmented: aug,
                tau,
                trace,
            });
        }

        let mut raised = None;
        for k in (0..n).filter(|&k| tau.get(k) < m + 2) {
            let next = tau.bumped(k);
            if ratlp::feasible(&build_lp2(&aug, &next))?.is_feasible() {
                raised = Some((k, next));
                break;
            }
        }
        let Some((k, next)) = raised else {
            return Err(Error::Internal(format!(
                "LP1{tau} infeasible and no LP2(τ + e_k) is feasible"
            )));
        };
        record.raised = Some(k);
        trace.push(record);
        tau = next;
        lp2_feasible = true;
    }
}

/// Density domination of `x` (over `m + 1` goods) certified by `τ`.
///
/// Besides the three defining condition groups this also requires `x` to be an
/// allocation: matching dimensions and every agent within budget. Together with
/// the binding budgets that forces `supp(x_a) ⊆ I_a ∪ E_a`.
pub fn check_density_domination(
    aug: &AugmentedInstance,
    x: &FractionalAllocation,
    tau: &ThresholdVector,
) -> bool {
    let n = aug.agents();
    let goods = aug.goods();
    if x.agents() != n || x.goods() != goods || tau.as_slice().len() != n {
        return false;
    }
    if tau.as_slice().iter().any(|&t| t < 1 || t > goods + 1) {
        return false;
    }
    let sets = internal_edge(aug, tau);
    let size_of = |a: usize, goods: &mut dyn Iterator<Item = usize>| {
        goods.fold(rational::zero(), |acc, g| {
            acc + x.get(a, g) * rational::int(aug.size(a, g))
        })
    };

    for a in 0..n {
        let budget = rational::int(aug.budget(a));
        if size_of(a, &mut (0..goods)) > budget {
            return false;
        }
        if size_of(a, &mut sets.support(a).into_iter()) != budget {
            return false;
        }
        for &g in &sets.internal[a] {
            if (0..n).any(|b| x.get(b, g) > x.get(a, g)) {
                return false;
            }
        }
    }
    let charity = x.charity();
    sets.all_internal().iter().all(|&g| charity[g].is_zero())
}

/// `max v_a(y)` over `0 <= y <= t` with `s_a(y) <= B_a`, by the fractional greedy
/// in decreasing density.
pub fn max_fractional_value(instance: &Instance, agent: usize, t: &[Rational]) -> Rational {
    let mut room = rational::int(instance.budget(agent));
    let mut value = rational::zero();
    for g in instance.goods_by_density(agent, true) {
        if t[g].is_zero() {
            continue;
        }
        let v = rational::int(instance.value(agent, g));
        let s = instance.size(agent, g);
        if s == 0 {
            value += &t[g] * v;
            continue;
        }
        if !room.is_positive() {
            break;
        }
        let s = rational::int(s);
        let fits = &room / &s;
        let take = if fits < t[g] { fits } else { t[g].clone() };
        room -= &take * &s;
        value += take * v;
    }
    value
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FefWitness {
    pub agent: usize,
    pub target: Target,
    pub own_value: Rational,
    pub envied_value: Rational,
}

impl fmt::Display for FefWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent {} values its bundle at {} but a feasible part of the {} holdings at {}",
            self.agent + 1,
            rational::to_pq(&self.own_value),
            self.target,
            rational::to_pq(&self.envied_value)
        )
    }
}

/// First envy violation in `(agent, target)` scan order, or `None` if `x` is FEF.
/// Infeasible allocations are rejected with an error.
pub fn fef_witness(instance: &Instance, x: &FractionalAllocation) -> Result<Option<FefWitness>> {
    x.check_feasible(instance)?;
    let n = instance.agents();
    let charity = x.charity();
    for a in 0..n {
        let own = instance.fractional_value(a, x.row(a));
        for target in Target::all_for(a, n) {
            let t = match target {
                Target::Agent(b) => x.row(b),
                Target::Charity => &charity[..],
            };
            let best = max_fractional_value(instance, a, t);
            if best > own {
                return Ok(Some(FefWitness {
                    agent: a,
                    target,
                    own_value: own,
                    envied_value: best,
                }));
            }
        }
    }
    Ok(None)
}

pub fn verify_fef(instance: &Instance, x: &FractionalAllocation) -> Result<bool> {
    Ok(fef_witness(instance, x)?.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn inst(values: Vec<Vec<u64>>, sizes: Vec<Vec<u64>>, budgets: Vec<u64>) -> Instance {
        Instance::new(values, sizes, budgets).unwrap()
    }

    fn rows(x: &[&[(i64, i64)]]) -> FractionalAllocation {
        FractionalAllocation::new(
            x.iter()
                .map(|r| r.iter().map(|&(p, q)| ratio(p, q)).collect())
                .collect(),
        )
        .unwrap()
    }

    /// Vertex enumeration of the bounded fractional knapsack: every vertex has each
    /// coordinate at 0 or `t_g` except at most one, which fills the budget.
    fn knapsack_vertices(instance: &Instance, agent: usize, t: &[Rational]) -> Rational {
        let m = t.len();
        let cap = rational::int(instance.budget(agent));
        let mut best = rational::zero();
        for free in (0..m).map(Some).chain([None]) {
            for mask in 0u32..(1 << m) {
                let mut y: Vec<Rational> = (0..m)
                    .map(|g| if mask >> g & 1 == 1 { t[g].clone() } else { rational::zero() })
                    .collect();
                if let Some(f) = free {
                    y[f] = rational::zero();
                    let used = instance.fractional_size(agent, &y);
                    let s = instance.size(agent, f);
                    if s == 0 || used > cap {
                        continue;
                    }
                    let amount = (&cap - used) / rational::int(s);
                    if amount.is_negative() || amount > t[f] {
                        continue;
                    }
                    y[f] = amount;
                }
                if instance.fractional_size(agent, &y) <= cap {
                    best = best.max(instance.fractional_value(agent, &y));
                }
            }
        }
        best
    }

    /// Feasibility of `{0 <= y <= t, s·y <= B, v·y >= level}`.
    fn reaches(instance: &Instance, agent: usize, t: &[Rational], level: &Rational) -> bool {
        let m = t.len();
        let bounds = t.iter().map(|u| (rational::zero(), u.clone())).collect();
        let mut lp = LinearProgram::with_bounds(bounds);
        let sizes = (0..m).map(|g| (g, rational::int(instance.size(agent, g)))).collect();
        lp.add_le(sizes, rational::int(instance.budget(agent)));
        let values = (0..m).map(|g| (g, rational::int(instance.value(agent, g)))).collect();
        lp.add_ge(values, level.clone());
        ratlp::feasible(&lp).unwrap().is_feasible()
    }

    #[test]
    fn thresholds_at_the_extremes() {
        let i = inst(vec![vec![4, 2]], vec![vec![2, 2]], vec![1]);
        let aug = instance::augment(&i).unwrap();
        let low = internal_edge(&aug, &ThresholdVector::ones(1));
        assert!(low.internal[0].is_empty());
        assert_eq!(low.edge[0], Some(0));
        let high = internal_edge(&aug, &ThresholdVector::new(vec![4], 2).unwrap());
        assert_eq!(high.internal[0], (0..3).collect());
        assert_eq!(high.edge[0], None);
        assert!(ThresholdVector::new(vec![5], 2).is_err());
        assert!(ThresholdVector::new(vec![0], 2).is_err());
    }

    #[test]
    fn internal_edge_follows_density_order() {
        // π = (2, 1, 3) in 1-based goods.
        let i = inst(vec![vec![1, 4]], vec![vec![1, 2]], vec![1]);
        let aug = instance::augment(&i).unwrap();
        assert_eq!(aug.density_ordering(0), &[1, 0, 2]);
        let sets = internal_edge(&aug, &ThresholdVector::new(vec![2], 2).unwrap());
        assert_eq!(sets.internal[0], [1].into_iter().collect());
        assert_eq!(sets.edge[0], Some(0));
    }

    #[test]
    fn initial_programs() {
        let i = inst(vec![vec![3, 1], vec![2, 2]], vec![vec![1, 2], vec![2, 1]], vec![2, 3]);
        let aug = instance::augment(&i).unwrap();
        let tau = ThresholdVector::ones(2);
        let lp2 = build_lp2(&aug, &tau);
        let zeros = vec![rational::zero(); lp2.var_count()];
        assert!(lp2.is_satisfied_by(&zeros));
        assert!(ratlp::feasible(&lp2).unwrap().is_feasible());
        // No dominance or full-assignment rows: 2 budgets, 2·2 zero-fixings, 3 supplies.
        assert_eq!(lp2.constraints().len(), 2 + 4 + 3);
    }

    #[test]
    fn dominance_row_count() {
        let i = inst(
            vec![vec![3, 1, 2], vec![2, 2, 1], vec![1, 1, 1]],
            vec![vec![1; 3]; 3],
            vec![2, 3, 1],
        );
        let aug = instance::augment(&i).unwrap();
        let tau = ThresholdVector::new(vec![3, 1, 2], 3).unwrap();
        let lp = build_lp1(&aug, &tau);
        let dominance = lp
            .constraints()
            .iter()
            .filter(|c| c.coeffs.len() == 2 && c.rhs.is_zero() && c.relation == Relation::Le)
            .count();
        // Internal goods per agent: 2, 0, 1; each meets both other agents.
        assert_eq!(dominance, 2 * 3);
    }

    #[test]
    fn full_threshold_is_infeasible() {
        let i = inst(vec![vec![5]], vec![vec![1]], vec![3]);
        let aug = instance::augment(&i).unwrap();
        let tau = ThresholdVector::new(vec![3], 1).unwrap();
        assert!(!ratlp::feasible(&build_lp1(&aug, &tau)).unwrap().is_feasible());
        assert!(!ratlp::feasible(&build_lp2(&aug, &tau)).unwrap().is_feasible());
    }

    #[test]
    fn single_agent_takes_the_good() {
        let i = inst(vec![vec![5]], vec![vec![1]], vec![3]);
        let out = divisible_fef(&i).unwrap();
        assert_eq!(out.allocation, rows(&[&[(1, 1)]]));
        assert!(out.iterations() <= 2);
    }

    #[test]
    fn identical_agents_split_evenly() {
        let i = inst(vec![vec![1], vec![1]], vec![vec![1], vec![1]], vec![1, 1]);
        let out = divisible_fef(&i).unwrap();
        assert_eq!(out.allocation, rows(&[&[(1, 2)], &[(1, 2)]]));
        assert_eq!(out.tau.as_slice(), &[2, 2]);
    }

    #[test]
    fn output_is_density_dominating_and_fef() {
        let i = inst(
            vec![vec![4, 1, 3], vec![2, 5, 0]],
            vec![vec![2, 1, 3], vec![1, 4, 2]],
            vec![3, 2],
        );
        let out = divisible_fef(&i).unwrap();
        assert!(check_density_domination(&out.augmented, &out.augmented_allocation, &out.tau));
        assert!(verify_fef(&i, &out.allocation).unwrap());
        assert!(out.iterations() <= 2 * 4);
        assert!(out.trace.iter().all(|r| r.lp2_feasible));
    }

    #[test]
    fn zero_allocation_is_not_dominating() {
        let i = inst(vec![vec![1, 1]], vec![vec![1, 1]], vec![1]);
        let aug = instance::augment(&i).unwrap();
        let x = FractionalAllocation::zeros(1, 3);
        assert!(!check_density_domination(&aug, &x, &ThresholdVector::ones(1)));
    }

    #[test]
    fn unassigned_internal_good_breaks_domination() {
        // Agent owns half of good 1 (internal at τ = 2) and pads with good 2.
        let i = inst(vec![vec![2, 1]], vec![vec![1, 1]], vec![1]);
        let aug = instance::augment(&i).unwrap();
        let tau = ThresholdVector::new(vec![2], 2).unwrap();
        let x = rows(&[&[(1, 2), (1, 2), (0, 1)]]);
        assert!(!check_density_domination(&aug, &x, &tau));
        let x = rows(&[&[(1, 1), (0, 1), (0, 1)]]);
        assert!(check_density_domination(&aug, &x, &tau));
    }

    #[test]
    fn single_owner_is_fef() {
        let i = inst(vec![vec![3, 2]], vec![vec![1, 1]], vec![2]);
        assert!(verify_fef(&i, &rows(&[&[(1, 1), (1, 1)]])).unwrap());
    }

    #[test]
    fn infeasible_allocation_is_an_error() {
        let i = inst(vec![vec![3, 2]], vec![vec![1, 1]], vec![1]);
        assert!(matches!(
            verify_fef(&i, &rows(&[&[(1, 1), (1, 1)]])),
            Err(Error::OverBudget { agent: 1, .. })
        ));
    }

    #[test]
    fn greedy_matches_vertices_and_bisection() {
        let i = inst(
            vec![vec![3, 5, 0, 2], vec![1, 1, 1, 1]],
            vec![vec![2, 3, 1, 1], vec![1, 2, 3, 4]],
            vec![4, 3],
        );
        let t = vec![ratio(1, 2), ratio(2, 3), ratio(1, 1), ratio(3, 4)];
        for a in 0..2 {
            let greedy = max_fractional_value(&i, a, &t);
            assert_eq!(greedy, knapsack_vertices(&i, a, &t));
            assert!(reaches(&i, a, &t, &greedy));
            assert!(!reaches(&i, a, &t, &(&greedy + ratio(1, 1000))));
        }
    }

    #[test]
    fn zero_size_goods_are_taken_whole() {
        let i = inst(vec![vec![2, 3]], vec![vec![0, 2]], vec![1]);
        let t = vec![ratio(1, 2), ratio(1, 1)];
        assert_eq!(max_fractional_value(&i, 0, &t), ratio(1, 1) + ratio(3, 2));
    }
}
