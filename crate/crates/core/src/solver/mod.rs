//! The two iteration schemes: the quasi-monotone dual-averaging method (the
//! subject of this crate) and the extrapolated regularized subgradient
//! comparator.

pub mod rqm;
pub mod srsg;

pub use rqm::{rqm_init, rqm_run, rqm_step, RqmState, RqmStepRecord};
pub use srsg::{srsg_gamma, srsg_init, srsg_run, srsg_step, srsg_theta, SrsgState};

use crate::error::Result;
use crate::oracle::SubgradientSample;

/// A subgradient oracle: maps a query point to one stochastic (or exact)
/// subgradient estimate. Solvers make exactly one call per step.
pub trait Oracle {
    fn sample(&mut self, x: &[f64]) -> Result<SubgradientSample>;
}

impl<F> Oracle for F
where
    F: FnMut(&[f64]) -> Result<SubgradientSample>,
{
    fn sample(&mut self, x: &[f64]) -> Result<SubgradientSample> {
        self(x)
    }
}
