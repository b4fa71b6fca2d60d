//! The regularized quasi-monotone iteration.
//!
//! Each step: sample a subgradient at the current iterate, fold it into the
//! weighted dual aggregate, forecast by solving the aggregated model
//! subproblem in closed form, then move to a convex combination of the
//! current iterate and the forecast:
//!
//! ```text
//! w_k      = oracle(x_k)
//! s_k      = s_{k-1} + a_k * w_k
//! x+_k     = argmin { <s_k, x> + A_{k+1} g(x) + gamma_{k+1} Psi(x) }
//! x_{k+1}  = (A_k x_k + a_{k+1} x+_k) / A_{k+1}
//! ```
//!
//! Iterates are convex combinations of the forecasts, which is what gives the
//! method guarantees on the last iterate rather than on an average. Alongside
//! the recursion the solver accumulates
//! `B_hat = 0.5 * sum_l (a_l^2 / mu_l) * ||w_l||^2` with
//! `mu_l = A_l * sigma + gamma_l * beta`; this is the empirical counterpart of
//! the second-moment term in the last-iterate bound
//! `(gamma_k * Psi(x_ref) + B_k) / A_k`.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::oracle::{HuberRegressionProblem, SubgradientSample};
use crate::prox::{rqm_prox, L1Regularizer};
use crate::schedule::{modulus_mu, Schedule};
use crate::solver::Oracle;
use crate::trace::{Trace, TraceOptions, TracePoint};
use crate::vecmath::all_finite;

/// Solver state at iterate index `k`. The aggregate fields lag the iterate by
/// one: after `k` steps the state holds `x_k` together with `s_{k-1}`,
/// `x+_{k-1}` and `B_hat_{k-1}`, because the sample at `x_k` has not been
/// drawn yet.
#[derive(Debug, Clone)]
pub struct RqmState {
    /// Index of the current iterate.
    pub k: usize,
    /// Current iterate `x_k`.
    pub x: Vec<f64>,
    /// Most recent forecast (equals the initial point before the first step).
    pub x_plus: Vec<f64>,
    /// Weighted dual aggregate (zero before the first step).
    pub s: Vec<f64>,
    /// Running weight sum `A_k`.
    pub a_sum: f64,
    /// Current prox scale `gamma_k`.
    pub gamma: f64,
    /// Accumulated weighted second-moment term.
    pub b_hat: f64,
    /// Running sum of squared subgradient norms.
    pub g2_sum: f64,
    /// Running max of squared subgradient norms.
    pub g2_max: f64,
}

/// Everything produced while advancing one step. Index `k` refers to the
/// sampling point, so the fields here are exactly the index-`k` quantities of
/// the recursion (`s_k` includes the step's sample, `b_hat` is `B_hat_k`).
#[derive(Debug, Clone)]
pub struct RqmStepRecord {
    pub k: usize,
    /// Iterate the subgradient was sampled at.
    pub x: Vec<f64>,
    pub w: SubgradientSample,
    /// Aggregate including this step's contribution.
    pub s: Vec<f64>,
    pub a: f64,
    pub a_sum: f64,
    pub gamma: f64,
    pub mu: f64,
    /// `B_hat_k`, i.e. including this step's term.
    pub b_hat: f64,
    /// Forecast computed from `s_k`.
    pub x_plus: Vec<f64>,
    /// The next iterate.
    pub x_next: Vec<f64>,
}

/// Initializes at `x_0 = argmin { A_0 g(x) + gamma_0 Psi(x) }`, which for the
/// shipped l1-plus-quadratic pair is the zero vector.
pub fn rqm_init(dim: usize, reg: &L1Regularizer, schedule: &Schedule) -> Result<RqmState> {
    let (_, a_sum0) = schedule.weights(0);
    let gamma0 = schedule.gamma(0);
    let x0 = rqm_prox(&vec![0.0; dim], a_sum0, reg.lambda, reg.sigma, gamma0)?;
    Ok(RqmState {
        k: 0,
        x: x0.clone(),
        x_plus: x0,
        s: vec![0.0; dim],
        a_sum: a_sum0,
        gamma: gamma0,
        b_hat: 0.0,
        g2_sum: 0.0,
        g2_max: 0.0,
    })
}

/// Advances the state one step (exactly one oracle call) and returns the
/// step's index-`k` quantities. Fails with a numerical error if any state
/// vector stops being finite.
pub fn rqm_step<O: Oracle>(
    state: &mut RqmState,
    reg: &L1Regularizer,
    schedule: &Schedule,
    oracle: &mut O,
) -> Result<RqmStepRecord> {
    let k = state.k;
    let (a_k, a_sum_k) = schedule.weights(k);
    let gamma_k = state.gamma;
    let mu_k = modulus_mu(a_sum_k, gamma_k, reg.sigma, schedule.beta)?;

    let w = oracle.sample(&state.x)?;
    if !w.squared_dual_norm.is_finite() {
        return Err(Error::Numerical {
            iter: k,
            msg: "oracle returned a non-finite subgradient".into(),
        });
    }
    for (sj, wj) in state.s.iter_mut().zip(&w.w) {
        *sj += a_k * wj;
    }
    // a_0 = 0 (quadratic weights) contributes nothing here even though A_0 = 0.
    state.b_hat += a_k * a_k * w.squared_dual_norm / (2.0 * mu_k);
    state.g2_sum += w.squared_dual_norm;
    state.g2_max = state.g2_max.max(w.squared_dual_norm);

    let (a_next, a_sum_next) = schedule.weights(k + 1);
    let gamma_next = schedule.gamma(k + 1);
    let x_plus = rqm_prox(&state.s, a_sum_next, reg.lambda, reg.sigma, gamma_next)?;
    let x_next: Vec<f64> = state
        .x
        .iter()
        .zip(&x_plus)
        .map(|(&xj, &fj)| (a_sum_k * xj + a_next * fj) / a_sum_next)
        .collect();

    if !(all_finite(&x_next) && all_finite(&state.s) && state.b_hat.is_finite()) {
        return Err(Error::Numerical {
            iter: k,
            msg: "solver state overflowed to a non-finite value".into(),
        });
    }

    let record = RqmStepRecord {
        k,
        x: std::mem::replace(&mut state.x, x_next),
        w,
        s: state.s.clone(),
        a: a_k,
        a_sum: a_sum_k,
        gamma: gamma_k,
        mu: mu_k,
        b_hat: state.b_hat,
        x_plus: x_plus.clone(),
        x_next: state.x.clone(),
    };
    state.x_plus = x_plus;
    state.k = k + 1;
    state.a_sum = a_sum_next;
    state.gamma = gamma_next;
    Ok(record)
}

fn trace_point(
    iter: usize,
    objective: f64,
    a_sum: f64,
    gamma: f64,
    b_hat: f64,
    opts: &TraceOptions,
    start: Instant,
) -> TracePoint {
    let (gap, bound) = match &opts.reference {
        Some(r) => (
            objective - r.objective,
            (gamma * r.psi() + b_hat) / a_sum,
        ),
        None => (f64::NAN, f64::NAN),
    };
    TracePoint {
        iter,
        objective,
        gap,
        bound,
        b_hat,
        gamma_over_a: gamma / a_sum,
        wall_ns: start.elapsed().as_nanos(),
    }
}

/// Runs `iters` steps against the problem's stochastic oracle, recording the
/// exact objective at the recording stride. Objective evaluation happens
/// outside the oracle budget; the solver itself never evaluates it.
///
/// Numerical failures mid-run return the partial trace with the failure
/// annotated; configuration problems fail eagerly.
pub fn rqm_run(
    problem: &HuberRegressionProblem,
    schedule: &Schedule,
    iters: usize,
    rng: &mut ChaCha8Rng,
    opts: &TraceOptions,
) -> Result<Trace> {
    if iters == 0 {
        return Err(Error::Config("iters must be at least 1".into()));
    }
    if schedule.sigma != problem.sigma {
        return Err(Error::Config(format!(
            "schedule sigma {} does not match problem sigma {}",
            schedule.sigma, problem.sigma
        )));
    }
    schedule.horizon_check(iters)?;

    let reg = problem.regularizer();
    let start = Instant::now();
    let mut state = rqm_init(problem.param_dim(), &reg, schedule)?;
    let mut points = Vec::new();
    let mut failure = None;
    let mut oracle = |x: &[f64]| problem.sample_subgradient(x, rng);

    for k in 0..iters {
        match rqm_step(&mut state, &reg, schedule, &mut oracle) {
            Ok(rec) => {
                if opts.records(k) {
                    let objective = problem.full_objective(&rec.x)?;
                    points.push(trace_point(
                        k, objective, rec.a_sum, rec.gamma, rec.b_hat, opts, start,
                    ));
                }
            }
            Err(e @ Error::Numerical { .. }) => {
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if failure.is_none() {
        // Final row: the accumulator holds the value as of the last completed
        // step (no sample is drawn at the final iterate).
        let objective = problem.full_objective(&state.x)?;
        points.push(trace_point(
            iters,
            objective,
            state.a_sum,
            state.gamma,
            state.b_hat,
            opts,
            start,
        ));
    }

    let steps = state.k.max(1) as f64;
    Ok(Trace {
        trial: 0,
        method: "rqm".into(),
        points,
        g2_max: state.g2_max,
        g2_mean: state.g2_sum / steps,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, DataSet, GenConfig};
    use crate::vecmath::linf_dist;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn small_problem() -> HuberRegressionProblem {
        let data = Arc::new(generate(&GenConfig::new(5, 40, 3, 2)).unwrap());
        HuberRegressionProblem::new(data, 2.0, 0.1, 0.0, 1).unwrap()
    }

    #[test]
    fn init_is_zero_for_all_schedules() {
        let reg = L1Regularizer::new(0.5, 0.0).unwrap();
        for sched in [Schedule::sqrt(0.0), Schedule::log(0.0), Schedule::quadratic(0.0)] {
            let state = rqm_init(11, &reg, &sched).unwrap();
            assert_eq!(state.x, vec![0.0; 11]);
            assert_eq!(state.s, vec![0.0; 11]);
            assert_eq!(state.b_hat, 0.0);
            assert_eq!(state.k, 0);
        }
    }

    #[test]
    fn state_dimension_matches_problem() {
        let data = Arc::new(generate(&GenConfig::new(1, 10, 10, 4)).unwrap());
        let p = HuberRegressionProblem::new(data, 2.0, 0.1, 0.0, 1).unwrap();
        let state = rqm_init(p.param_dim(), &p.regularizer(), &Schedule::sqrt(0.0)).unwrap();
        assert_eq!(state.x.len(), 11);
        assert_eq!(state.x_plus.len(), 11);
        assert_eq!(state.s.len(), 11);
    }

    #[test]
    fn update_is_convex_combination() {
        // Hand evaluation of the update with A_0 = 1, a_1 = 1, forecast (-2, 1).
        let reg = L1Regularizer::new(1.0, 0.0).unwrap();
        let sched = Schedule::sqrt(0.0);
        let mut state = rqm_init(2, &reg, &sched).unwrap();
        // One oracle designed so that the first forecast is (-2, 1):
        // x+_0 = sign(-s) * max(|s| - A_1 * lambda, 0) / gamma_1 with
        // A_1 = 2, gamma_1 = sqrt(2).
        let target = [-2.0f64, 1.0];
        let w: Vec<f64> = target
            .iter()
            .map(|t| -(t.signum()) * (t.abs() * 2.0f64.sqrt() + 2.0))
            .collect();
        let mut oracle = |_x: &[f64]| Ok(SubgradientSample::new(w.clone()));
        let rec = rqm_step(&mut state, &reg, &sched, &mut oracle).unwrap();
        assert!(linf_dist(&rec.x_plus, &target) < 1e-12);
        assert!(linf_dist(&state.x, &[-1.0, 0.5]) < 1e-12);
    }

    #[test]
    fn zero_oracle_is_a_fixed_point() {
        let reg = L1Regularizer::new(0.3, 0.0).unwrap();
        let sched = Schedule::sqrt(0.0);
        let mut state = rqm_init(3, &reg, &sched).unwrap();
        let mut oracle = |_x: &[f64]| Ok(SubgradientSample::new(vec![0.0; 3]));
        for _ in 0..50 {
            let rec = rqm_step(&mut state, &reg, &sched, &mut oracle).unwrap();
            assert_eq!(rec.x_plus, vec![0.0; 3]);
            assert_eq!(state.x, vec![0.0; 3]);
        }
        assert_eq!(state.b_hat, 0.0);
    }

    #[test]
    fn matches_hand_rolled_recurrence() {
        // Deterministic 1-D problem f(x) = |x| with lambda = 0, unit weights
        // with sqrt gamma. The recurrence is scripted independently below.
        let reg = L1Regularizer {
            lambda: 0.0,
            sigma: 0.0,
        };
        let sched = Schedule::sqrt(0.0);
        let mut state = rqm_init(1, &reg, &sched).unwrap();
        let mut oracle = |x: &[f64]| Ok(SubgradientSample::new(vec![x[0].signum()]));

        // Independent recurrence: s accumulates sign(x); forecast -s/gamma.
        let mut s = 0.0f64;
        let mut x = 0.0f64;
        let mut xs = Vec::new();
        for k in 0..3usize {
            s += x.signum();
            let forecast = -s / ((k + 2) as f64).sqrt();
            x = ((k + 1) as f64 * x + forecast) / ((k + 2) as f64);
            xs.push(x);
        }

        for k in 0..3usize {
            let rec = rqm_step(&mut state, &reg, &sched, &mut oracle).unwrap();
            assert!(
                (rec.x_next[0] - xs[k]).abs() <= 1e-12,
                "k = {k}: {} vs {}",
                rec.x_next[0],
                xs[k]
            );
        }
    }

    #[test]
    fn iterates_are_convex_combinations_of_forecasts() {
        // Shadow accumulator for (a_0 x_0 + sum a_l x+_{l-1}) / A_k.
        let p = small_problem();
        let reg = p.regularizer();
        for sched in [Schedule::sqrt(0.0), Schedule::quadratic(0.0)] {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut state = rqm_init(p.param_dim(), &reg, &sched).unwrap();
            let mut oracle = |x: &[f64]| p.sample_subgradient(x, &mut rng);
            let (a0, _) = sched.weights(0);
            let mut shadow: Vec<f64> = state.x.iter().map(|v| a0 * v).collect();
            for _ in 0..200 {
                let rec = rqm_step(&mut state, &reg, &sched, &mut oracle).unwrap();
                let (a_next, a_sum_next) = sched.weights(rec.k + 1);
                for (acc, f) in shadow.iter_mut().zip(&rec.x_plus) {
                    *acc += a_next * f;
                }
                let combo: Vec<f64> = shadow.iter().map(|v| v / a_sum_next).collect();
                let scale = 1.0 + state
                    .x
                    .iter()
                    .map(|v| v.abs())
                    .fold(0.0, f64::max);
                assert!(
                    linf_dist(&combo, &state.x) <= 1e-10 * scale,
                    "kind {:?}",
                    sched.kind
                );
            }
        }
    }

    #[test]
    fn b_hat_is_nondecreasing_and_quadratic_first_term_vanishes() {
        let p = small_problem();
        let reg = p.regularizer();
        let sched = Schedule::quadratic(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = rqm_init(p.param_dim(), &reg, &sched).unwrap();
        let mut oracle = |x: &[f64]| p.sample_subgradient(x, &mut rng);
        let rec = rqm_step(&mut state, &reg, &sched, &mut oracle).unwrap();
        // a_0 = 0 makes the first term vanish despite A_0 = 0.
        assert_eq!(rec.b_hat, 0.0);
        let mut prev = rec.b_hat;
        for _ in 0..100 {
            let rec = rqm_step(&mut state, &reg, &sched, &mut oracle).unwrap();
            assert!(rec.b_hat >= prev);
            prev = rec.b_hat;
        }
    }

    #[test]
    fn run_trace_shape_and_determinism() {
        let p = small_problem();
        let sched = Schedule::sqrt(0.0);
        let opts = TraceOptions::default();

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t1 = rqm_run(&p, &sched, 1, &mut rng, &opts).unwrap();
        assert_eq!(t1.points.len(), 2);
        assert_eq!(t1.points[0].iter, 0);
        assert_eq!(t1.points[1].iter, 1);

        let mut rng_a = ChaCha8Rng::seed_from_u64(10);
        let mut rng_b = ChaCha8Rng::seed_from_u64(10);
        let a = rqm_run(&p, &sched, 100, &mut rng_a, &opts).unwrap();
        let b = rqm_run(&p, &sched, 100, &mut rng_b, &opts).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_eq!(pa.objective, pb.objective);
            assert_eq!(pa.b_hat, pb.b_hat);
        }

        assert!(rqm_run(&p, &sched, 0, &mut rng, &opts).is_err());
        assert!(rqm_run(&p, &Schedule::sqrt(0.5), 5, &mut rng, &opts).is_err());
    }

    #[test]
    fn numerical_failure_annotates_partial_trace() {
        let data = Arc::new(
            DataSet::from_parts(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]).unwrap(),
        );
        let p = HuberRegressionProblem::new(data, 2.0, 0.1, 0.0, 1).unwrap();
        let reg = p.regularizer();
        let sched = Schedule::sqrt(0.0);
        let mut state = rqm_init(2, &reg, &sched).unwrap();
        let mut calls = 0usize;
        let mut oracle = |_x: &[f64]| {
            calls += 1;
            Ok(SubgradientSample::new(vec![
                if calls > 3 { f64::NAN } else { 1.0 },
                0.0,
            ]))
        };
        for k in 0..10 {
            match rqm_step(&mut state, &reg, &sched, &mut oracle) {
                Ok(_) => assert!(k < 3),
                Err(Error::Numerical { iter, .. }) => {
                    assert_eq!(iter, 3);
                    return;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        panic!("expected a numerical failure");
    }
}
