//! Monte-Carlo multilevel optimization for nested Stackelberg problems.
//!
//! A multilevel problem is a hierarchy of optimizers sharing one decision
//! vector. The engine samples perturbations at each upper level, lets every
//! lower level respond, and solves the last level to local optimality.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail every check

pub mod baselines;
pub mod engine;
pub mod error;
pub mod nlp;
pub mod oracles;
pub mod problem;
pub mod problems;
pub mod sampler;

pub use engine::{run_mcmo, smoothen, EngineParams, Mcmo, RunHistory};
pub use error::{Error, Result};
pub use nlp::{solve_full, SolveStatus, SolverResult, SolverSettings};
pub use problem::{
    Constraint, ConstraintKind, ConstraintScope, DecisionVector, Function, KnownOptimum, LevelParams, LevelSpec,
    MultilevelProblem, Sense, DEFAULT_FEASIBILITY_TOL,
};
pub use sampler::RngStream;
