//! Linear-programming design of local degree distributions.

pub mod design;
pub mod simplex;

pub use design::{
    alternate_optimize, optimize_lambda, optimize_rho, CandidateScore, LpDesignParams, LpDesignReport, LpLocalDesign,
};
pub use simplex::{lp_solve, Constraint, LpProblem, LpSolution, Relation, Sense};
