//! Distributed subgradient methods over time-varying directed graphs.
//!
//! Every method here is an instance of the iteration
//!
//! ```text
//! X(t+1) = P(t) X(t) - Delta(t) G(t)
//! ```
//!
//! with `P(t)` row-stochastic, `Delta(t)` a diagonal step-size matrix and
//! `G(t)` a block of local subgradients. The crate provides the
//! stochastic-matrix machinery behind that iteration, checkers for the mixing
//! and step-size conditions under which it converges, the specialized
//! algorithms it unifies, and diagnostics that make the convergence
//! argument observable.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abs_prob;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod problem;
pub mod schedule;
pub mod sequence;

pub use abs_prob::{compute_abs_prob, induced_row_stochastic, pushsum_abs_prob, AbsProbMethod, AbsProbSequence};
pub use error::{Error, Result};
pub use graph::{check_a1, check_a1_prime, check_a1_star, ConditionReport, DirectedGraph};
pub use matrix::{ergodicity_coefficient, Kind, ProbabilityVector, StochasticMatrix};
pub use problem::{ArgminSet, ConvexProblem, L1Median, L1Regression};
pub use schedule::{AssumptionAudit, StepRule, StepSchedule};
pub use sequence::{backward_product, MatrixSequence, RandomFamily};
