//! Last-iterate solvers for stochastic composite convex minimization.
//!
//! The centerpiece is a quasi-monotone dual-averaging method for problems of
//! the form `min F(x) = f(x) + g(x)` where only stochastic subgradients of
//! the loss `f` are available and the regularizer `g` is simple enough for
//! closed-form subproblems. The method aggregates weighted subgradients,
//! forecasts from the aggregate, and keeps iterates as convex combinations of
//! the forecasts, which yields `O(1/sqrt(k+1))` convergence in expectation on
//! the last iterate itself (improving to `O(ln k / k)` when `g` is strongly
//! convex).
//!
//! The crate ships:
//!
//! * the solver ([`solver::rqm`]) and an extrapolated subgradient comparator
//!   ([`solver::srsg`]);
//! * control-parameter schedules ([`schedule`]);
//! * closed-form prox solvers and the conjugate-style auxiliary function
//!   ([`prox`]);
//! * the Huber/l1 robust-regression experiment: objective, stochastic oracle
//!   ([`oracle`]) and synthetic data generation ([`datagen`]);
//! * runtime verification of the theory - potential-function descent, the
//!   last-iterate bound, and rate-slope estimation ([`diagnostics`]);
//! * a multi-trial benchmark runner ([`bench`]) behind the `rqm` binary.

pub mod bench;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod oracle;
pub mod prox;
pub mod schedule;
pub mod solver;
pub mod trace;
pub mod vecmath;

pub use error::{Error, Result};

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// The crate-wide random stream. Trial `t` of a multi-trial experiment uses
/// `seeded_rng(seed + t)`, so cross-language reimplementations can match the
/// trial partitioning even if the stream values differ.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
