//! Comparator: stochastic regularized subgradient iteration with
//! extrapolation.
//!
//! With `theta_k = 2 / (k + 1)` and `gamma_k = (k + 1)^{3/2}`:
//!
//! ```text
//! y_k      = x^_k + theta_k * (1/theta_{k-1} - 1) * (x^_k - x^_{k-1})
//! x^_{k+1} = argmin { <w(y_k), x> + g(x) + gamma_k * Psi(x - y_k) }
//! ```
//!
//! The convergence guarantees attach to the `x^` sequence, so traces report
//! the objective there, never at the extrapolated points. Initialization sets
//! `x^_0 = x^_{-1} = 0` so the first extrapolation term vanishes.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::oracle::HuberRegressionProblem;
use crate::prox::srsg_prox;
use crate::solver::Oracle;
use crate::trace::{Trace, TraceOptions, TracePoint};
use crate::vecmath::all_finite;

#[derive(Debug, Clone)]
pub struct SrsgState {
    pub k: usize,
    pub x_hat: Vec<f64>,
    pub x_hat_prev: Vec<f64>,
    /// Most recent extrapolated point.
    pub y: Vec<f64>,
}

pub fn srsg_theta(k: usize) -> f64 {
    2.0 / (k as f64 + 1.0)
}

pub fn srsg_gamma(k: usize) -> f64 {
    ((k + 1) as f64).powf(1.5)
}

/// Extrapolation coefficient `theta_k * (1/theta_{k-1} - 1)`; zero at `k = 0`
/// where the previous coefficient is undefined (and irrelevant, because the
/// initial displacement is zero).
pub fn srsg_extrapolation(k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        srsg_theta(k) * (1.0 / srsg_theta(k - 1) - 1.0)
    }
}

pub fn srsg_init(dim: usize) -> SrsgState {
    SrsgState {
        k: 0,
        x_hat: vec![0.0; dim],
        x_hat_prev: vec![0.0; dim],
        y: vec![0.0; dim],
    }
}

/// One extrapolate-sample-prox step. Exactly one oracle call, at the
/// extrapolated point.
pub fn srsg_step<O: Oracle>(state: &mut SrsgState, lambda: f64, oracle: &mut O) -> Result<()> {
    let k = state.k;
    let coeff = srsg_extrapolation(k);
    let y: Vec<f64> = state
        .x_hat
        .iter()
        .zip(&state.x_hat_prev)
        .map(|(&c, &p)| c + coeff * (c - p))
        .collect();
    let w = oracle.sample(&y)?;
    let x_next = srsg_prox(&w.w, &y, lambda, srsg_gamma(k))?;
    if !(all_finite(&x_next) && all_finite(&y)) {
        return Err(Error::Numerical {
            iter: k,
            msg: "solver state overflowed to a non-finite value".into(),
        });
    }
    state.x_hat_prev = std::mem::replace(&mut state.x_hat, x_next);
    state.y = y;
    state.k = k + 1;
    Ok(())
}

/// Runs `iters` steps against the problem's stochastic oracle. Only the plain
/// l1 regularizer is supported here (the closed-form prox has no quadratic
/// term), so problems with `sigma > 0` are rejected.
pub fn srsg_run(
    problem: &HuberRegressionProblem,
    iters: usize,
    rng: &mut ChaCha8Rng,
    opts: &TraceOptions,
) -> Result<Trace> {
    if iters == 0 {
        return Err(Error::Config("iters must be at least 1".into()));
    }
    if problem.sigma != 0.0 {
        return Err(Error::Config(
            "the extrapolated comparator supports sigma = 0 only".into(),
        ));
    }

    let start = Instant::now();
    let mut state = srsg_init(problem.param_dim());
    let mut points = Vec::new();
    let mut failure = None;
    let mut g2_sum = 0.0;
    let mut g2_max = 0.0f64;

    let mut record = |iter: usize, x_hat: &[f64]| -> Result<()> {
        let objective = problem.full_objective(x_hat)?;
        let gap = match &opts.reference {
            Some(r) => objective - r.objective,
            None => f64::NAN,
        };
        points.push(TracePoint {
            iter,
            objective,
            gap,
            bound: f64::NAN,
            b_hat: f64::NAN,
            gamma_over_a: f64::NAN,
            wall_ns: start.elapsed().as_nanos(),
        });
        Ok(())
    };

    for k in 0..iters {
        if opts.records(k) {
            record(k, &state.x_hat)?;
        }
        let mut oracle = |x: &[f64]| {
            let s = problem.sample_subgradient(x, rng)?;
            g2_sum += s.squared_dual_norm;
            g2_max = g2_max.max(s.squared_dual_norm);
            Ok(s)
        };
        match srsg_step(&mut state, problem.lambda, &mut oracle) {
            Ok(()) => {}
            Err(e @ Error::Numerical { .. }) => {
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if failure.is_none() {
        record(iters, &state.x_hat)?;
    }
    drop(record);

    Ok(Trace {
        trial: 0,
        method: "srsg".into(),
        points,
        g2_max,
        g2_mean: g2_sum / state.k.max(1) as f64,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenConfig};
    use crate::oracle::SubgradientSample;
    use rand::SeedableRng;
    use std::sync::Arc;

    #[test]
    fn extrapolation_coefficients() {
        // theta_2 = 2/3, theta_1 = 1: coefficient (2/3)(1 - 1) = 0.
        assert_eq!(srsg_extrapolation(2), 0.0);
        // theta_3 = 1/2, theta_2 = 2/3: coefficient (1/2)(3/2 - 1) = 1/4.
        assert!((srsg_extrapolation(3) - 0.25).abs() < 1e-15);
        assert_eq!(srsg_extrapolation(0), 0.0);
        // theta_k stays in (0, 1] for k >= 1 and coefficients stay finite.
        for k in 1..10_000usize {
            let t = srsg_theta(k);
            assert!(t > 0.0 && t <= 1.0);
            assert!(srsg_extrapolation(k).is_finite());
        }
    }

    #[test]
    fn zero_displacement_means_no_extrapolation() {
        let mut state = srsg_init(2);
        state.x_hat = vec![0.7, -0.3];
        state.x_hat_prev = state.x_hat.clone();
        state.k = 5;
        let mut seen_y = Vec::new();
        let mut oracle = |x: &[f64]| {
            seen_y = x.to_vec();
            Ok(SubgradientSample::new(vec![0.0, 0.0]))
        };
        srsg_step(&mut state, 0.1, &mut oracle).unwrap();
        assert_eq!(seen_y, vec![0.7, -0.3]);
    }

    #[test]
    fn trace_shape_determinism_and_sigma_guard() {
        let data = Arc::new(generate(&GenConfig::new(4, 30, 3, 2)).unwrap());
        let p = HuberRegressionProblem::new(data.clone(), 2.0, 0.1, 0.0, 1).unwrap();
        let opts = TraceOptions::default();

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = srsg_run(&p, 1, &mut rng, &opts).unwrap();
        assert_eq!(t.points.len(), 2);

        let mut ra = ChaCha8Rng::seed_from_u64(9);
        let mut rb = ChaCha8Rng::seed_from_u64(9);
        let a = srsg_run(&p, 80, &mut ra, &opts).unwrap();
        let b = srsg_run(&p, 80, &mut rb, &opts).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_eq!(pa.objective, pb.objective);
        }

        let elastic = HuberRegressionProblem::new(data, 2.0, 0.1, 0.5, 1).unwrap();
        assert!(srsg_run(&elastic, 5, &mut rng, &opts).is_err());
    }
}
