//! Finding a lottery over a small menu that every agent accepts, when agents
//! can only be asked yes/no membership questions.
//!
//! Utilities and thresholds are multiples of a known `epsilon`, so every
//! turning point can be recovered exactly with bisection plus rational
//! reconstruction. All arithmetic is exact.

pub mod error;
pub mod feasibility;
pub mod geometry;
pub mod instances;
mod lp;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod solvers;

pub use error::{Error, Result};
pub use feasibility::{feasible_full, helly_witness, select, ConstraintSet, HellyWitness, SelectResult};
pub use geometry::{exact_threshold, exact_threshold_pred, learn_hyperplane, LearnedHalfspace};
pub use model::{AgentSpec, EdgePoint, Instance, Lottery};
pub use oracle::{Oracle, QueryCategory, QueryLedger};
pub use rational::Rational;
pub use solvers::{
    solve_baseline, solve_deterministic, solve_randomized, Advice, AdviceKind, Outcome, SolveReport,
};
