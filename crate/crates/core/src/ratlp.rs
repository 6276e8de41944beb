//! Exact feasibility for linear programs over box-bounded rational variables.
//!
//! [`feasible`] runs a presolve that folds fixed variables and singleton rows into
//! the bounds, then a phase-1 bounded-variable simplex minimising the sum of
//! artificial variables. Pivoting follows Bland's smallest-index rule for both the
//! entering and the leaving variable, so the method terminates without any
//! perturbation. All arithmetic is on [`Rational`], and the returned point satisfies
//! every row and bound exactly.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

/// `Σ coeffs · x  (≤ | =)  rhs`, with sparse `(variable, coefficient)` pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn activity(&self, point: &[Rational]) -> Rational {
        self.coeffs
            .iter()
            .fold(rational::zero(), |acc, (j, a)| acc + a * &point[*j])
    }

    pub fn is_satisfied_by(&self, point: &[Rational]) -> bool {
        let lhs = self.activity(point);
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProgram {
    var_count: usize,
    names: Vec<String>,
    bounds: Vec<(Rational, Rational)>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeasibilityResult {
    Feasible(Vec<Rational>),
    Infeasible,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible(_))
    }

    pub fn point(&self) -> Option<&[Rational]> {
        match self {
            Self::Feasible(p) => Some(p),
            Self::Infeasible => None,
        }
    }
}

/// Structural problems with a program, kept apart from infeasibility.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("constraint {constraint} references variable {index}, program has {var_count}")]
    CoefficientIndex {
        constraint: usize,
        index: usize,
        var_count: usize,
    },
    #[error("expected {expected} variable bounds, found {found}")]
    BoundCount { expected: usize, found: usize },
    #[error("variable {var} has lower bound above upper bound")]
    InvertedBound { var: usize },
}

impl LinearProgram {
    /// Every variable in `[0, 1]`.
    pub fn unit_box(var_count: usize) -> Self {
        Self::with_bounds(vec![(rational::zero(), rational::one()); var_count])
    }

    pub fn with_bounds(bounds: Vec<(Rational, Rational)>) -> Self {
        let var_count = bounds.len();
        Self {
            var_count,
            names: (1..=var_count).map(|i| format!("x{i}")).collect(),
            bounds,
            constraints: Vec::new(),
        }
    }

    /// Builds a program without checking it; [`feasible`] reports structural errors.
    pub fn from_parts(
        var_count: usize,
        bounds: Vec<(Rational, Rational)>,
        constraints: Vec<Constraint>,
    ) -> Self {
        Self {
            var_count,
            names: (1..=var_count).map(|i| format!("x{i}")).collect(),
            bounds,
            constraints,
        }
    }

    pub fn set_name(&mut self, var: usize, name: impl Into<String>) {
        self.names[var] = name.into();
    }

    pub fn push(&mut self, coeffs: Vec<(usize, Rational)>, relation: Relation, rhs: Rational) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, Rational)>, rhs: Rational) {
        self.push(coeffs, Relation::Le, rhs);
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, Rational)>, rhs: Rational) {
        self.push(coeffs, Relation::Eq, rhs);
    }

    /// Stored as the negated `≤` row.
    pub fn add_ge(&mut self, coeffs: Vec<(usize, Rational)>, rhs: Rational) {
        let neg = coeffs.into_iter().map(|(j, a)| (j, -a)).collect();
        self.push(neg, Relation::Le, -rhs);
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn bounds(&self) -> &[(Rational, Rational)] {
        &self.bounds
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    /// Exact check of every row and bound.
    pub fn is_satisfied_by(&self, point: &[Rational]) -> bool {
        point.len() == self.var_count
            && point
                .iter()
                .zip(&self.bounds)
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
            && self.constraints.iter().all(|c| c.is_satisfied_by(point))
    }

    fn validate(&self) -> Result<(), LpError> {
        if self.bounds.len() != self.var_count {
            return Err(LpError::BoundCount {
                expected: self.var_count,
                found: self.bounds.len(),
            });
        }
        if let Some(var) = self.bounds.iter().position(|(lo, hi)| lo > hi) {
            return Err(LpError::InvertedBound { var });
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(&(index, _)) = c.coeffs.iter().find(|(j, _)| *j >= self.var_count) {
                return Err(LpError::CoefficientIndex {
                    constraint: i,
                    index,
                    var_count: self.var_count,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variables: {}", self.var_count)?;
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            writeln!(f, "  {} in [{lo}, {hi}]", self.names[j])?;
        }
        writeln!(f, "constraints: {}", self.constraints.len())?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "  c{}:", i + 1)?;
            if c.coeffs.is_empty() {
                write!(f, " 0")?;
            }
            for (k, (j, a)) in c.coeffs.iter().enumerate() {
                let mag = a.abs();
                let sign = if a.is_negative() { "-" } else if k == 0 { "" } else { "+" };
                if mag == rational::one() {
                    write!(f, " {sign}{}", self.names[*j])?;
                } else {
                    write!(f, " {sign}{mag}*{}", self.names[*j])?;
                }
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            writeln!(f, " {rel} {}", c.rhs)?;
        }
        Ok(())
    }
}

/// Decides whether the program's polyhedron is nonempty.
pub fn feasible(lp: &LinearProgram) -> Result<FeasibilityResult, LpError> {
    lp.validate()?;
    let Some(reduced) = presolve(lp) else {
        return Ok(FeasibilityResult::Infeasible);
    };
    let Some(point) = reduced.solve() else {
        return Ok(FeasibilityResult::Infeasible);
    };
    assert!(
        lp.is_satisfied_by(&point),
        "simplex returned a point violating the program"
    );
    Ok(FeasibilityResult::Feasible(point))
}

struct Row {
    coeffs: BTreeMap<usize, Rational>,
    relation: Relation,
    rhs: Rational,
}

struct Reduced {
    lo: Vec<Rational>,
    hi: Vec<Rational>,
    rows: Vec<Row>,
}

/// Folds fixed variables into right-hand sides and turns singleton rows into bound
/// updates until nothing changes. Returns `None` once infeasibility is evident.
fn presolve(lp: &LinearProgram) -> Option<Reduced> {
    let mut lo: Vec<Rational> = lp.bounds.iter().map(|b| b.0.clone()).collect();
    let mut hi: Vec<Rational> = lp.bounds.iter().map(|b| b.1.clone()).collect();
    let mut rows: Vec<Row> = lp
        .constraints
        .iter()
        .map(|c| {
            let mut coeffs: BTreeMap<usize, Rational> = BTreeMap::new();
            for (j, a) in &c.coeffs {
                *coeffs.entry(*j).or_insert_with(rational::zero) += a;
            }
            coeffs.retain(|_, a| !a.is_zero());
            Row {
                coeffs,
                relation: c.relation,
                rhs: c.rhs.clone(),
            }
        })
        .collect();

    loop {
        let mut changed = false;
        let mut kept = Vec::with_capacity(rows.len());
        for mut row in rows {
            let fixed: Vec<usize> = row
                .coeffs
                .keys()
                .copied()
                .filter(|&j| lo[j] == hi[j])
                .collect();
            for j in fixed {
                let a = row.coeffs.remove(&j).unwrap();
                row.rhs -= a * &lo[j];
            }
            match row.coeffs.len() {
                0 => {
                    let ok = match row.relation {
                        Relation::Le => !row.rhs.is_negative(),
                        Relation::Eq => row.rhs.is_zero(),
                    };
                    if !ok {
                        return None;
                    }
                }
                1 => {
                    let (&j, a) = row.coeffs.iter().next().unwrap();
                    let bound = &row.rhs / a;
                    match (row.relation, a.is_positive()) {
                        (Relation::Eq, _) => {
                            if bound < lo[j] || bound > hi[j] {
                                return None;
                            }
                            lo[j] = bound.clone();
                            hi[j] = bound;
                        }
                        (Relation::Le, true) => {
                            if bound < hi[j] {
                                hi[j] = bound;
                            }
                        }
                        (Relation::Le, false) => {
                            if bound > lo[j] {
                                lo[j] = bound;
                            }
                        }
                    }
                    if lo[j] > hi[j] {
                        return None;
                    }
                    changed = true;
                }
                _ => kept.push(row),
            }
        }
        rows = kept;
        if !changed {
            break;
        }
    }
    Some(Reduced { lo, hi, rows })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
}

/// Phase-1 tableau. Columns are the free structural variables (shifted to lower
/// bound 0) followed by one slack per `≤` row. Artificial variables are never
/// stored as columns: they only appear as basis labels `>= ncols` and are dropped
/// for good once they leave the basis.
struct Tableau {
    ncols: usize,
    rows: Vec<Vec<Rational>>,
    reduced_cost: Vec<Rational>,
    upper: Vec<Option<Rational>>,
    state: Vec<ColState>,
    basis: Vec<usize>,
    basic_value: Vec<Rational>,
}

impl Reduced {
    fn solve(&self) -> Option<Vec<Rational>> {
        let free: Vec<usize> = (0..self.lo.len()).filter(|&j| self.lo[j] < self.hi[j]).collect();
        let mut values = self.lo.clone();
        if self.rows.is_empty() {
            return Some(values);
        }
        let mut column_of = vec![usize::MAX; self.lo.len()];
        for (c, &j) in free.iter().enumerate() {
            column_of[j] = c;
        }
        let nfree = free.len();
        let nslack = self
            .rows
            .iter()
            .filter(|r| r.relation == Relation::Le)
            .count();
        let ncols = nfree + nslack;

        let mut upper: Vec<Option<Rational>> = free
            .iter()
            .map(|&j| Some(&self.hi[j] - &self.lo[j]))
            .collect();
        upper.extend(std::iter::repeat_n(None, nslack));

        let mut tab = Tableau {
            ncols,
            rows: Vec::with_capacity(self.rows.len()),
            reduced_cost: vec![rational::zero(); ncols],
            upper,
            state: vec![ColState::AtLower; ncols],
            basis: Vec::with_capacity(self.rows.len()),
            basic_value: Vec::with_capacity(self.rows.len()),
        };

        let mut next_slack = nfree;
        for (i, row) in self.rows.iter().enumerate() {
            let mut dense = vec![rational::zero(); ncols];
            let mut rhs = row.rhs.clone();
            for (&j, a) in &row.coeffs {
                rhs -= a * &self.lo[j];
                dense[column_of[j]] = a.clone();
            }
            let slack = (row.relation == Relation::Le).then(|| {
                let s = next_slack;
                next_slack += 1;
                dense[s] = rational::one();
                s
            });
            match slack {
                Some(s) if !rhs.is_negative() => {
                    tab.state[s] = ColState::Basic;
                    tab.basis.push(s);
                }
                _ => {
                    if rhs.is_negative() {
                        for v in dense.iter_mut() {
                            *v = -&*v;
                        }
                        rhs = -rhs;
                    }
                    for (d, v) in tab.reduced_cost.iter_mut().zip(&dense) {
                        *d -= v;
                    }
                    tab.basis.push(ncols + i);
                }
            }
            tab.rows.push(dense);
            tab.basic_value.push(rhs);
        }

        if !tab.run() {
            return None;
        }

        for (c, &j) in free.iter().enumerate() {
            let shifted = match tab.state[c] {
                ColState::AtLower => rational::zero(),
                ColState::AtUpper => tab.upper[c].clone().unwrap(),
                ColState::Basic => {
                    let r = tab.basis.iter().position(|&b| b == c).unwrap();
                    tab.basic_value[r].clone()
                }
            };
            values[j] = &self.lo[j] + shifted;
        }
        Some(values)
    }
}

impl Tableau {
    fn artificial_free(&self) -> bool {
        self.basis
            .iter()
            .zip(&self.basic_value)
            .all(|(&b, v)| b < self.ncols || v.is_zero())
    }

    /// Smallest-index column whose move away from its bound lowers the objective.
    fn entering(&self) -> Option<(usize, bool)> {
        (0..self.ncols).find_map(|j| {
            if self.upper[j].as_ref().is_some_and(|u| u.is_zero()) {
                return None;
            }
            let d = &self.reduced_cost[j];
            match self.state[j] {
                ColState::AtLower if d.is_negative() => Some((j, true)),
                ColState::AtUpper if d.is_positive() => Some((j, false)),
                _ => None,
            }
        })
    }

    /// Returns true when a point with all artificials at zero has been reached.
    fn run(&mut self) -> bool {
        loop {
            if self.artificial_free() {
                return true;
            }
            let Some((q, increase)) = self.entering() else {
                return false;
            };
            self.step(q, increase);
        }
    }

    fn step(&mut self, q: usize, increase: bool) {
        // Ratio test. `alpha` is the rate at which the basic variable falls as the
        // entering variable moves in its improving direction.
        let mut best: Option<(Rational, usize, usize, bool)> = None; // (limit, var, row, hits_upper)
        for (i, row) in self.rows.iter().enumerate() {
            let t = &row[q];
            if t.is_zero() {
                continue;
            }
            let alpha = if increase { t.clone() } else { -t };
            let var = self.basis[i];
            let candidate = if alpha.is_positive() {
                Some((&self.basic_value[i] / &alpha, false))
            } else {
                let up = if var < self.ncols { self.upper[var].as_ref() } else { None };
                up.map(|u| ((u - &self.basic_value[i]) / -&alpha, true))
            };
            if let Some((limit, hits_upper)) = candidate {
                let better = match &best {
                    None => true,
                    Some((bl, bv, _, _)) => limit < *bl || (limit == *bl && var < *bv),
                };
                if better {
                    best = Some((limit, var, i, hits_upper));
                }
            }
        }

        let flip = self.upper[q].clone();
        let take_flip = match (&flip, &best) {
            (Some(u), Some((bl, _, _, _))) => u <= bl,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => panic!("phase-1 objective unbounded below"),
        };

        let step = if take_flip {
            flip.clone().unwrap()
        } else {
            best.as_ref().unwrap().0.clone()
        };
        if !step.is_zero() {
            for (i, row) in self.rows.iter().enumerate() {
                let t = &row[q];
                if t.is_zero() {
                    continue;
                }
                let delta = t * &step;
                if increase {
                    self.basic_value[i] -= delta;
                } else {
                    self.basic_value[i] += delta;
                }
            }
        }

        if take_flip {
            self.state[q] = if increase {
                ColState::AtUpper
            } else {
                ColState::AtLower
            };
            return;
        }

        let (_, leaving, r, hits_upper) = best.unwrap();
        let entering_value = if increase {
            step
        } else {
            self.upper[q].as_ref().unwrap() - step
        };
        if leaving < self.ncols {
            self.state[leaving] = if hits_upper {
                ColState::AtUpper
            } else {
                ColState::AtLower
            };
        }
        self.pivot(r, q);
        self.basis[r] = q;
        self.basic_value[r] = entering_value;
        self.state[q] = ColState::Basic;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let piv = self.rows[r][q].clone();
        if piv != rational::one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v = &*v / &piv;
                }
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let support: Vec<usize> = (0..self.ncols).filter(|&j| !pivot_row[j].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[q].is_zero() {
                continue;
            }
            let factor = row[q].clone();
            for &j in &support {
                row[j] -= &factor * &pivot_row[j];
            }
        }
        let factor = self.reduced_cost[q].clone();
        if !factor.is_zero() {
            for &j in &support {
                self.reduced_cost[j] -= &factor * &pivot_row[j];
            }
        }
        self.rows[r] = pivot_row;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn fixed_by_equality() {
        let mut lp = LinearProgram::unit_box(1);
        lp.add_eq(vec![(0, int(1))], int(1));
        assert_eq!(feasible(&lp).unwrap(), FeasibilityResult::Feasible(vec![int(1)]));
    }

    #[test]
    fn lower_bound_beyond_box() {
        let mut lp = LinearProgram::unit_box(1);
        lp.add_le(vec![(0, int(-1))], int(-2));
        assert_eq!(feasible(&lp).unwrap(), FeasibilityResult::Infeasible);
    }

    #[test]
    fn needs_pivoting() {
        // x + y = 1, x - y = 1/2  ->  x = 3/4, y = 1/4
        let mut lp = LinearProgram::unit_box(2);
        lp.add_eq(vec![(0, int(1)), (1, int(1))], int(1));
        lp.add_eq(vec![(0, int(1)), (1, int(-1))], ratio(1, 2));
        let res = feasible(&lp).unwrap();
        assert_eq!(res.point().unwrap(), &[ratio(3, 4), ratio(1, 4)]);
    }

    #[test]
    fn infeasible_after_pivoting() {
        let mut lp = LinearProgram::unit_box(3);
        lp.add_eq(vec![(0, int(1)), (1, int(1)), (2, int(1))], int(2));
        lp.add_le(vec![(0, int(1)), (1, int(1))], ratio(1, 2));
        lp.add_le(vec![(2, int(2)), (0, int(1))], int(1));
        assert_eq!(feasible(&lp).unwrap(), FeasibilityResult::Infeasible);
    }

    #[test]
    fn duplicate_coefficients_are_summed() {
        let mut lp = LinearProgram::unit_box(2);
        lp.add_eq(vec![(0, int(1)), (0, int(1)), (1, int(1))], ratio(5, 2));
        let res = feasible(&lp).unwrap();
        assert!(lp.is_satisfied_by(res.point().unwrap()));
    }

    #[test]
    fn structural_errors_are_distinct() {
        let mut lp = LinearProgram::unit_box(1);
        lp.add_le(vec![(3, int(1))], int(1));
        assert!(matches!(feasible(&lp), Err(LpError::CoefficientIndex { index: 3, .. })));
        let lp = LinearProgram::from_parts(2, vec![(int(0), int(1))], vec![]);
        assert!(matches!(feasible(&lp), Err(LpError::BoundCount { expected: 2, found: 1 })));
        let lp = LinearProgram::with_bounds(vec![(int(1), int(0))]);
        assert!(matches!(feasible(&lp), Err(LpError::InvertedBound { var: 0 })));
    }

    #[test]
    fn degenerate_cycling_candidate() {
        // Beale-style degenerate system with many ties at zero.
        let mut lp = LinearProgram::with_bounds(vec![(int(0), int(10)); 4]);
        lp.add_le(vec![(0, ratio(1, 4)), (1, int(-8)), (2, int(-1)), (3, int(9))], int(0));
        lp.add_le(vec![(0, ratio(1, 2)), (1, int(-12)), (2, ratio(-1, 2)), (3, int(3))], int(0));
        lp.add_le(vec![(2, int(1))], int(1));
        lp.add_eq(vec![(0, int(1)), (1, int(1)), (2, int(1)), (3, int(1))], int(3));
        let res = feasible(&lp).unwrap();
        assert!(lp.is_satisfied_by(res.point().unwrap()));
    }

    #[test]
    fn listing_mentions_every_row() {
        let mut lp = LinearProgram::unit_box(2);
        lp.set_name(0, "z[1,1]");
        lp.add_ge(vec![(0, int(1)), (1, int(-1))], int(0));
        lp.add_eq(vec![(0, int(2))], int(1));
        let text = lp.to_string();
        assert!(text.contains("c1: -z[1,1] +x2 <= 0"), "{text}");
        assert!(text.contains("c2: 2*z[1,1] = 1"), "{text}");
    }
}
