use thiserror::Error;

use crate::ratlp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors reported by the solvers and verifiers.
///
/// Agent and good numbers inside messages are 1-based, matching the file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid instance (wrong dimensions, zero budget, ...).
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// The divisible pipeline needs every size to be positive.
    #[error("good {good} has size 0 for agent {agent}; densities are undefined")]
    ZeroSize { agent: usize, good: usize },

    /// Allocation dimensions do not match the instance.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A fractional entry or column sum left `[0, 1]`.
    #[error("fractional allocation out of range: {0}")]
    FractionRange(String),

    /// A bundle does not fit its owner's budget.
    #[error("allocation infeasible: agent {agent} uses size {size} with budget {budget}")]
    OverBudget {
        agent: usize,
        size: String,
        budget: u64,
    },

    /// Two bundles share a good, or a bundle names a good outside `[m]`.
    #[error("invalid bundles: {0}")]
    Bundles(String),

    #[error("epsilon {value} outside {range}")]
    Epsilon { value: String, range: &'static str },

    #[error("brute-force knapsack limited to 20 items, got {0}")]
    BruteForceLimit(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    /// A proven invariant failed; always an implementation bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}
