//! Fair division of goods under generalized assignment constraints.
//!
//! Every agent has its own value and size for each good plus a budget; a bundle is
//! feasible for an agent when its total size (under that agent's sizes) fits the
//! budget. Goods nobody receives go to the charity.
//!
//! The crate provides:
//!
//! * [`divisible::divisible_fef`]: a feasibly envy-free (FEF) fractional allocation,
//!   found by walking threshold vectors and deciding exact rational LPs
//!   ([`ratlp::feasible`]).
//! * [`indivisible::compute_fefx`] and [`indivisible::compute_approx_fefx`]: FEFx and
//!   (1-ε)-FEFx integral allocations built by swapping minimal envied subsets out of
//!   the charity, with knapsack oracles from [`knapsack`].
//! * Exact verifiers for every fairness notion above.
//! * [`reductions`]: the knapsack-to-FEFx reduction as a runnable harness and the
//!   Nash-welfare counterexample fixture.
//!
//! All fractional quantities are exact [`Rational`]s; nothing in the solvers or
//! verifiers touches floating point.

pub mod divisible;
pub mod error;
pub mod format;
pub mod indivisible;
pub mod instance;
pub mod knapsack;
pub mod random;
pub mod rational;
pub mod ratlp;
pub mod reductions;

pub use error::{Error, Result};
pub use instance::{
    AugmentedInstance, FractionalAllocation, GoodSet, Instance, IntegralAllocation,
};
pub use rational::Rational;
