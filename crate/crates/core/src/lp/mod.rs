//! The local-realistic linear program.
//!
//! Variables are joint distributions over deterministic strategies ("atoms"),
//! one outcome per setting for each party; `d^(2m)` of them. Constraints match
//! every marginal `P(a, b | i, k)` of the noisy table.

pub mod dump;
pub mod instance;
pub mod ratio;
pub mod simplex;

pub use dump::to_cplex_lp;
pub use instance::{
    atom_assignment, atom_count, atom_index, critical_visibility, critical_visibility_with,
    deterministic_atom_table, extended_visibility, lr_feasible, marginal_residual, Assignment,
    Feasibility, LrLpInstance, VisibilityResult, VisibilityStatus,
};
pub use ratio::{EvaluatorStats, LpShape, RatioEvaluator};
pub use simplex::{DenseSimplex, LinearProgram, LpError, LpSolution, LpSolver, Relation};
