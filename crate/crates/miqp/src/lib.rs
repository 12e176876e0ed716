//! Convex MIQP solver: best-first branch-and-bound over binary columns with a
//! primal-dual interior-point method for the continuous relaxations.

mod bnb;
mod error;
mod heuristic;
pub mod ldl;
mod problem;
mod qp;

pub use bnb::{
    solve, solve_from, BranchingRule, NodeAction, NodeTrace, Solution, SolveStats, SolveStatus, SolverConfig,
};
pub use error::SolverError;
pub use heuristic::{align_switches, complementarity_heuristic, exclusive_choice, Keep};
pub use problem::{Elimination, ExclusivePair, MiqpProblem, ModelStats, Row};
pub use qp::{solve_qp, QpOutcome, QpSettings, QpSolution};
