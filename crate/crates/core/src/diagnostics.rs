//! Runtime verification of the solver's theory: potential-function descent,
//! the last-iterate bound, rate envelopes, slope estimation, and brute-force
//! cross-checks of the closed-form prox solvers.
//!
//! Every check returns a [`CheckReport`] with the pinned tolerance and the
//! observed headroom (`margin >= 0` means pass), so the `verify` subcommand
//! and the acceptance suite share one implementation.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{HuberRegressionProblem, SubgradientSample};
use crate::prox::{phi_eval, phi_gradient_check, L1Regularizer};
use crate::schedule::{Schedule, ScheduleKind};
use crate::seeded_rng;
use crate::solver::{rqm_init, rqm_step, RqmStepRecord};
use crate::trace::{Reference, Trace};
use crate::vecmath::dot;

/// Absolute tolerance for prox-vs-brute-force agreement.
pub const PROX_EQUIV_TOL: f64 = 1e-6;
/// Tolerance for the finite-difference gradient identity of the auxiliary
/// function (central differences with `h = 1e-4`).
pub const PHI_GRAD_TOL: f64 = 1e-5;
pub const PHI_GRAD_STEP: f64 = 1e-4;
/// Relative slack for per-step potential descent in deterministic mode.
pub const LYAPUNOV_SLACK: f64 = 1e-8;
/// Absolute slack for the deterministic last-iterate bound.
pub const BOUND_SLACK: f64 = 1e-8;
/// Relative improvement across a doubled budget below which a reference
/// solution counts as converged.
pub const REFERENCE_RTOL: f64 = 1e-6;
/// Required log-log slope of the mean gap under the square-root schedule
/// (theory guarantees an upper envelope of slope -0.5; sampling noise and the
/// transient loosen the measured fit).
pub const SLOPE_THRESHOLD_SQRT: f64 = -0.35;
/// Required log-log slope under the logarithmic schedule with a strongly
/// convex regularizer (the `ln(2k+3)/(k+1)` envelope fits around -0.85).
pub const SLOPE_THRESHOLD_LOG: f64 = -0.7;

/// Outcome of one named check. `margin` is the headroom left before the
/// tolerance would be violated; a check passes exactly when `margin >= 0`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub margin: f64,
    pub tolerance: f64,
}

impl CheckReport {
    fn from_margin(check: &str, margin: f64, tolerance: f64) -> Self {
        CheckReport {
            check: check.to_string(),
            pass: margin >= 0.0,
            margin,
            tolerance,
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force scalar minimization used as the independent prox oracle.
// ---------------------------------------------------------------------------

pub mod bruteforce {
    /// Golden-section search on `[lo, hi]`; exact for unimodal functions.
    pub fn golden_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        const INVPHI: f64 = 0.618_033_988_749_894_9;
        let mut x1 = hi - INVPHI * (hi - lo);
        let mut x2 = lo + INVPHI * (hi - lo);
        let mut f1 = f(x1);
        let mut f2 = f(x2);
        while hi - lo > tol {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INVPHI * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INVPHI * (hi - lo);
                f2 = f(x2);
            }
        }
        0.5 * (lo + hi)
    }

    /// Grid scan over `[lo, hi]` followed by golden-section refinement around
    /// the best cell. For a strictly convex objective the grid argmin's
    /// neighbors bracket the true minimizer, so the result is accurate to the
    /// refinement tolerance (in well-conditioned regions; flat minima are
    /// limited by value roundoff).
    pub fn min_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let n = 4096usize;
        let step = (hi - lo) / n as f64;
        let mut best_i = 0usize;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let v = f(lo + i as f64 * step);
            if v < best {
                best = v;
                best_i = i;
            }
        }
        let blo = lo + best_i.saturating_sub(1) as f64 * step;
        let bhi = lo + (best_i + 1).min(n) as f64 * step;
        golden_min(&f, blo, bhi, 1e-11)
    }

    /// Minimizes a 1-D convex function by bisecting on the sign of its
    /// (nondecreasing) subderivative inside a bracket. Unlike value-based
    /// search this stays exact in regions where the objective is numerically
    /// flat, so low-curvature instances still verify to tight tolerances.
    pub fn min_convex_by_slope(slope: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        if slope(lo) >= 0.0 {
            return lo;
        }
        if slope(hi) <= 0.0 {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * mid.abs() {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Per-coordinate minimization of the aggregated subproblem
    /// `<s, x> + A * (lambda ||x||_1 + sigma/2 ||x||^2) + gamma/2 ||x||^2`.
    /// A coarse grid brackets the minimizer of each coordinate objective,
    /// then subderivative bisection refines it.
    pub fn rqm_prox_oracle(
        s: &[f64],
        a_sum: f64,
        lambda: f64,
        sigma: f64,
        gamma: f64,
    ) -> Vec<f64> {
        let curv = gamma + a_sum * sigma;
        s.iter()
            .map(|&sj| {
                let radius = sj.abs() / curv + 1.0;
                let h = |t: f64| {
                    sj * t + a_sum * (lambda * t.abs() + 0.5 * sigma * t * t)
                        + 0.5 * gamma * t * t
                };
                let (blo, bhi) = bracket_by_grid(&h, -radius, radius);
                min_convex_by_slope(
                    |t| sj + a_sum * (lambda * t.signum_or_zero() + sigma * t) + gamma * t,
                    blo,
                    bhi,
                )
            })
            .collect()
    }

    /// Per-coordinate minimization of
    /// `<w, x> + lambda ||x||_1 + gamma/2 ||x - y||^2`.
    pub fn srsg_prox_oracle(w: &[f64], y: &[f64], lambda: f64, gamma: f64) -> Vec<f64> {
        w.iter()
            .zip(y)
            .map(|(&wj, &yj)| {
                let radius = (wj.abs() + lambda) / gamma + 1.0;
                let h = |t: f64| {
                    wj * t + lambda * t.abs() + 0.5 * gamma * (t - yj) * (t - yj)
                };
                let (blo, bhi) = bracket_by_grid(&h, yj - radius, yj + radius);
                min_convex_by_slope(
                    |t| wj + lambda * t.signum_or_zero() + gamma * (t - yj),
                    blo,
                    bhi,
                )
            })
            .collect()
    }

    /// Coarse grid scan returning the cells adjacent to the best grid point.
    fn bracket_by_grid(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
        let n = 4096usize;
        let step = (hi - lo) / n as f64;
        let mut best_i = 0usize;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let v = f(lo + i as f64 * step);
            if v < best {
                best = v;
                best_i = i;
            }
        }
        (
            lo + best_i.saturating_sub(1) as f64 * step,
            lo + (best_i + 1).min(n) as f64 * step,
        )
    }

    trait SignumOrZero {
        fn signum_or_zero(self) -> f64;
    }

    impl SignumOrZero for f64 {
        // The subdifferential of |t| at 0 is [-1, 1]; 0 picks its midpoint,
        // which keeps the bisection bracket straddling a kink minimum.
        fn signum_or_zero(self) -> f64 {
            if self == 0.0 {
                0.0
            } else {
                self.signum()
            }
        }
    }
}

fn open_interval(rng: &mut crate::ChaCha8Rng, hi: f64) -> f64 {
    // (0, hi]: flip the half-open unit sample.
    hi * (1.0 - rng.random::<f64>())
}

/// Worst absolute coordinate error of `prox` against brute-force minimization
/// over random instances with `s` entries in `[-10, 10]` and positive
/// parameters in `(0, 10]`. The prox is injectable so tests can verify the
/// check catches a tampered implementation.
pub fn max_rqm_prox_error<F>(prox: F, instances: usize, seed: u64) -> f64
where
    F: Fn(&[f64], f64, f64, f64, f64) -> Result<Vec<f64>>,
{
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let dim = rng.random_range(1..=3);
        let s: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let a_sum = open_interval(&mut rng, 10.0);
        let lambda = open_interval(&mut rng, 10.0);
        let sigma = open_interval(&mut rng, 10.0);
        let gamma = open_interval(&mut rng, 10.0);
        let got = prox(&s, a_sum, lambda, sigma, gamma).expect("positive curvature");
        let want = bruteforce::rqm_prox_oracle(&s, a_sum, lambda, sigma, gamma);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    worst
}

/// Same as [`max_rqm_prox_error`] for the anchored comparator subproblem.
pub fn max_srsg_prox_error<F>(prox: F, instances: usize, seed: u64) -> f64
where
    F: Fn(&[f64], &[f64], f64, f64) -> Result<Vec<f64>>,
{
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let dim = rng.random_range(1..=3);
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let lambda = open_interval(&mut rng, 10.0);
        let gamma = open_interval(&mut rng, 10.0);
        let got = prox(&w, &y, lambda, gamma).expect("positive gamma");
        let want = bruteforce::srsg_prox_oracle(&w, &y, lambda, gamma);
        for (g, t) in got.iter().zip(&want) {
            worst = worst.max((g - t).abs());
        }
    }
    worst
}

/// Both closed-form prox solvers against brute-force minimization.
pub fn check_prox_equivalence(instances: usize, seed: u64) -> CheckReport {
    let rqm = max_rqm_prox_error(crate::prox::rqm_prox, instances, seed);
    let srsg = max_srsg_prox_error(crate::prox::srsg_prox, instances, seed.wrapping_add(1));
    CheckReport::from_margin("prox_equivalence", PROX_EQUIV_TOL - rqm.max(srsg), PROX_EQUIV_TOL)
}

/// Finite-difference gradient of the auxiliary function against its
/// maximizer, over random instances.
pub fn check_phi_gradient(instances: usize, seed: u64) -> CheckReport {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let dim = rng.random_range(1..=3);
        let s: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let a_sum = open_interval(&mut rng, 10.0);
        let lambda = open_interval(&mut rng, 10.0);
        let sigma = open_interval(&mut rng, 10.0);
        let gamma = open_interval(&mut rng, 10.0);
        let err = phi_gradient_check(&s, a_sum, lambda, sigma, gamma, PHI_GRAD_STEP)
            .expect("positive curvature");
        worst = worst.max(err);
    }
    CheckReport::from_margin("phi_gradient_identity", PHI_GRAD_TOL - worst, PHI_GRAD_TOL)
}

// ---------------------------------------------------------------------------
// Potential function and last-iterate bound.
// ---------------------------------------------------------------------------

/// One evaluation of the descent potential
/// `V_k = A_k (F(x_k) - F(x_ref)) + phi_k(-s_k) + <s_k, x_ref> + A_k g(x_ref) - B_k`.
/// The potential is nonincreasing along the iteration (pointwise with an
/// exact oracle, in conditional expectation stochastically) for any fixed
/// reference point; only convexity at the reference enters the argument.
#[derive(Debug, Clone)]
pub struct LyapunovRecord {
    pub k: usize,
    pub v: f64,
    pub f_gap_term: f64,
    pub phi_term: f64,
    pub linear_term: f64,
    pub b_term: f64,
}

/// Assembles the potential from a step record when the objective at the
/// sampling point is already known.
pub fn lyapunov_from_parts(
    rec: &RqmStepRecord,
    reg: &L1Regularizer,
    f_at_x: f64,
    x_ref: &[f64],
    f_ref: f64,
) -> Result<LyapunovRecord> {
    let neg_s: Vec<f64> = rec.s.iter().map(|v| -v).collect();
    let (phi_term, _) = phi_eval(&neg_s, rec.a_sum, reg.lambda, reg.sigma, rec.gamma)?;
    let f_gap_term = rec.a_sum * (f_at_x - f_ref);
    let linear_term = dot(&rec.s, x_ref) + rec.a_sum * reg.value(x_ref);
    let b_term = rec.b_hat;
    Ok(LyapunovRecord {
        k: rec.k,
        v: f_gap_term + phi_term + linear_term - b_term,
        f_gap_term,
        phi_term,
        linear_term,
        b_term,
    })
}

/// Assembles the potential for a step of a Huber regression run.
pub fn lyapunov(
    rec: &RqmStepRecord,
    problem: &HuberRegressionProblem,
    x_ref: &[f64],
    f_ref: f64,
) -> Result<LyapunovRecord> {
    let f_at_x = problem.full_objective(&rec.x)?;
    lyapunov_from_parts(rec, &problem.regularizer(), f_at_x, x_ref, f_ref)
}

/// Gap and bounds at one iteration: the running last-iterate bound
/// `(gamma_k Psi(x_ref) + B_k) / A_k` and, for the two analyzed schedules,
/// the closed-form rate envelope.
#[derive(Debug, Clone)]
pub struct BoundRecord {
    pub k: usize,
    pub theorem_bound: f64,
    pub corollary_bound: f64,
    pub gap: f64,
}

/// Closed-form rate envelope for the analyzed schedule kinds; NaN for kinds
/// without one.
pub fn envelope(kind: ScheduleKind, psi_ref: f64, g2: f64, beta: f64, sigma: f64, k: usize) -> f64 {
    match kind {
        ScheduleKind::Sqrt => (psi_ref + g2 / beta) / ((k + 1) as f64).sqrt(),
        ScheduleKind::Log => (psi_ref + g2 / sigma) * ((2 * k + 3) as f64).ln() / (k + 1) as f64,
        _ => f64::NAN,
    }
}

/// Runs the iteration with the exact full-batch oracle and hands each step
/// record (plus the objective at its sampling point) to `visit`.
fn deterministic_scan(
    problem: &HuberRegressionProblem,
    schedule: &Schedule,
    steps: usize,
    mut visit: impl FnMut(&RqmStepRecord, f64) -> Result<()>,
) -> Result<()> {
    if schedule.sigma != problem.sigma {
        return Err(Error::Config(format!(
            "schedule sigma {} does not match problem sigma {}",
            schedule.sigma, problem.sigma
        )));
    }
    schedule.horizon_check(steps)?;
    let reg = problem.regularizer();
    let mut state = rqm_init(problem.param_dim(), &reg, schedule)?;
    for _ in 0..steps {
        let mut loss_at_x = f64::NAN;
        let mut oracle = |x: &[f64]| {
            let (loss, w) = problem.loss_and_subgradient(x)?;
            loss_at_x = loss;
            Ok(w)
        };
        let rec = rqm_step(&mut state, &reg, schedule, &mut oracle)?;
        let f_at_x = loss_at_x + reg.value(&rec.x);
        visit(&rec, f_at_x)?;
    }
    Ok(())
}

/// Deterministic-mode potential descent: with exact subgradients,
/// `V_{k+1} <= V_k` must hold pointwise (up to roundoff) for every reference
/// point. Checks `n_refs` random references over `iters` steps and reports
/// the worst normalized increment.
pub fn check_lyapunov(
    problem: &HuberRegressionProblem,
    schedule: &Schedule,
    iters: usize,
    n_refs: usize,
    seed: u64,
) -> Result<CheckReport> {
    let dim = problem.param_dim();
    let mut rng = seeded_rng(seed);
    let refs: Vec<Vec<f64>> = (0..n_refs)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let f_refs: Vec<f64> = refs
        .iter()
        .map(|r| problem.full_objective(r))
        .collect::<Result<_>>()?;
    let reg = problem.regularizer();

    let mut prev: Vec<Option<f64>> = vec![None; n_refs];
    let mut worst = f64::NEG_INFINITY;
    deterministic_scan(problem, schedule, iters, |rec, f_at_x| {
        for (i, x_ref) in refs.iter().enumerate() {
            let v = lyapunov_from_parts(rec, &reg, f_at_x, x_ref, f_refs[i])?.v;
            if let Some(p) = prev[i] {
                worst = worst.max((v - p) / (1.0 + p.abs()));
            }
            prev[i] = Some(v);
        }
        Ok(())
    })?;
    Ok(CheckReport::from_margin(
        "lyapunov_descent",
        LYAPUNOV_SLACK - worst,
        LYAPUNOV_SLACK,
    ))
}

/// Deterministic-mode last-iterate bound: `gap_k <= (gamma_k Psi(x_ref) + B_k) / A_k`
/// pointwise (up to roundoff) at every `k` with `A_k > 0`. Returns the worst
/// violation together with the per-iteration records.
pub fn bound_records(
    problem: &HuberRegressionProblem,
    schedule: &Schedule,
    iters: usize,
    reference: &Reference,
) -> Result<Vec<BoundRecord>> {
    let psi_ref = reference.psi();
    let mut g2 = 0.0f64;
    let mut out = Vec::with_capacity(iters);
    deterministic_scan(problem, schedule, iters, |rec, f_at_x| {
        g2 = g2.max(rec.w.squared_dual_norm);
        let theorem_bound = if rec.a_sum > 0.0 {
            (rec.gamma * psi_ref + rec.b_hat) / rec.a_sum
        } else {
            f64::INFINITY
        };
        out.push(BoundRecord {
            k: rec.k,
            theorem_bound,
            corollary_bound: envelope(
                schedule.kind,
                psi_ref,
                g2,
                schedule.beta,
                schedule.sigma,
                rec.k,
            ),
            gap: f_at_x - reference.objective,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn check_theorem_bound(
    problem: &HuberRegressionProblem,
    schedule: &Schedule,
    iters: usize,
    reference: &Reference,
) -> Result<CheckReport> {
    let records = bound_records(problem, schedule, iters, reference)?;
    let worst = records
        .iter()
        .map(|r| r.gap - r.theorem_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckReport::from_margin(
        "theorem_bound_deterministic",
        BOUND_SLACK - worst,
        BOUND_SLACK,
    ))
}

// ---------------------------------------------------------------------------
// Reference solutions.
// ---------------------------------------------------------------------------

/// Deterministic full-batch run with self-certification by budget doubling:
/// the best objective seen by a checkpoint must improve by at most
/// [`REFERENCE_RTOL`] (relative) over the next doubling, otherwise the run
/// keeps doubling until `max_doublings` pairs have failed.
fn reference_loop(
    dim: usize,
    reg: &L1Regularizer,
    eval: &mut dyn FnMut(&[f64]) -> Result<(f64, SubgradientSample)>,
    initial_budget: usize,
    max_doublings: usize,
) -> Result<Reference> {
    // The analyzed schedule pair: logarithmic gamma when the regularizer is
    // strongly convex, square-root gamma otherwise.
    let schedule = if reg.sigma > 0.0 {
        Schedule::log(reg.sigma)
    } else {
        Schedule::sqrt(0.0)
    };
    let mut state = rqm_init(dim, reg, &schedule)?;
    let mut best: Option<Reference> = None;
    let mut prev_best: Option<f64> = None;
    let mut next_checkpoint = initial_budget;
    let mut failed_pairs = 0usize;
    let mut k = 0usize;
    loop {
        let (loss, w) = eval(&state.x)?;
        let f = loss + reg.value(&state.x);
        if best.as_ref().is_none_or(|b| f < b.objective) {
            best = Some(Reference {
                x: state.x.clone(),
                objective: f,
            });
        }
        if k == next_checkpoint {
            let cur = best.as_ref().expect("evaluated at least once").objective;
            if let Some(prev) = prev_best {
                if prev - cur <= REFERENCE_RTOL * (1.0 + prev.abs()) {
                    return Ok(best.expect("present"));
                }
                failed_pairs += 1;
                if failed_pairs >= max_doublings {
                    return Err(Error::ReferenceNotConverged(format!(
                        "best objective still improving at iteration {k}: {prev} -> {cur}"
                    )));
                }
            }
            prev_best = Some(cur);
            next_checkpoint *= 2;
        }
        let mut once = Some(w);
        let mut oracle = |_: &[f64]| Ok(once.take().expect("one oracle call per step"));
        rqm_step(&mut state, reg, &schedule, &mut oracle)?;
        k += 1;
    }
}

/// Reference solution for an arbitrary composite objective given a fused
/// (value, exact subgradient) evaluator for the loss part. Runs `budget`
/// iterations and certifies against `2 * budget`; errors if the doubled
/// budget still improves the best objective by more than [`REFERENCE_RTOL`].
pub fn reference_solution_generic(
    dim: usize,
    reg: &L1Regularizer,
    eval: &mut dyn FnMut(&[f64]) -> Result<(f64, SubgradientSample)>,
    budget: usize,
) -> Result<Reference> {
    if budget < 10_000 {
        return Err(Error::Config(format!(
            "reference budget must be at least 10000, got {budget}"
        )));
    }
    reference_loop(dim, reg, eval, budget, 1)
}

/// Reference solution for a Huber regression instance.
pub fn reference_solution(problem: &HuberRegressionProblem, budget: usize) -> Result<Reference> {
    let reg = problem.regularizer();
    let mut eval = |x: &[f64]| problem.loss_and_subgradient(x);
    reference_solution_generic(problem.param_dim(), &reg, &mut eval, budget)
}

/// Like [`reference_solution`] but keeps doubling the budget (up to
/// `max_doublings` failed pairs) instead of failing on the first
/// uncertified pair.
pub fn certified_reference(
    problem: &HuberRegressionProblem,
    initial_budget: usize,
    max_doublings: usize,
) -> Result<Reference> {
    if initial_budget < 10_000 {
        return Err(Error::Config(format!(
            "reference budget must be at least 10000, got {initial_budget}"
        )));
    }
    let reg = problem.regularizer();
    let mut eval = |x: &[f64]| problem.loss_and_subgradient(x);
    reference_loop(
        problem.param_dim(),
        &reg,
        &mut eval,
        initial_budget,
        max_doublings.max(1),
    )
}

// ---------------------------------------------------------------------------
// Ensembles, envelopes and rate slopes.
// ---------------------------------------------------------------------------

/// Per-iteration statistics across an ensemble of trials sharing one
/// recording grid.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub trials: usize,
    pub iters: Vec<usize>,
    pub mean_obj: Vec<f64>,
    pub std_obj: Vec<f64>,
    pub mean_gap: Vec<f64>,
    pub se_gap: Vec<f64>,
    pub mean_bound: Vec<f64>,
    /// Max over trials of the per-trial running max of squared subgradient
    /// norms: the empirical second-moment constant.
    pub g2_max: f64,
}

pub fn ensemble_stats(traces: &[Trace]) -> Result<EnsembleStats> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Config("empty trace ensemble".into()))?;
    for t in traces {
        if let Some(f) = &t.failure {
            return Err(Error::Numerical {
                iter: t.points.len(),
                msg: format!("trial {} failed: {f}", t.trial),
            });
        }
        if t.points.len() != first.points.len() {
            return Err(Error::Config("traces have mismatched recording grids".into()));
        }
    }
    let n = traces.len() as f64;
    let mut stats = EnsembleStats {
        trials: traces.len(),
        iters: Vec::new(),
        mean_obj: Vec::new(),
        std_obj: Vec::new(),
        mean_gap: Vec::new(),
        se_gap: Vec::new(),
        mean_bound: Vec::new(),
        g2_max: traces.iter().map(|t| t.g2_max).fold(0.0, f64::max),
    };
    for (idx, p) in first.points.iter().enumerate() {
        let objs: Vec<f64> = traces.iter().map(|t| t.points[idx].objective).collect();
        let gaps: Vec<f64> = traces.iter().map(|t| t.points[idx].gap).collect();
        let bounds: Vec<f64> = traces.iter().map(|t| t.points[idx].bound).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
        let mean_obj = mean(&objs);
        let std_obj = if traces.len() > 1 {
            (objs.iter().map(|o| (o - mean_obj) * (o - mean_obj)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mean_gap = mean(&gaps);
        stats.iters.push(p.iter);
        stats.mean_obj.push(mean_obj);
        stats.std_obj.push(std_obj);
        stats.mean_gap.push(mean_gap);
        stats.se_gap.push(std_obj / n.sqrt());
        stats.mean_bound.push(mean(&bounds));
    }
    Ok(stats)
}

/// Monte-Carlo form of the last-iterate bound: at every recorded iteration
/// the mean gap must stay below the mean running bound plus three standard
/// errors.
pub fn check_stochastic_bound(stats: &EnsembleStats) -> CheckReport {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..stats.iters.len() {
        let bound = stats.mean_bound[i];
        if !bound.is_finite() {
            continue; // A_k = 0 at index 0 under quadratic weights
        }
        worst = worst.max(stats.mean_gap[i] - (bound + 3.0 * stats.se_gap[i]));
    }
    CheckReport::from_margin("theorem_bound_stochastic", -worst, 0.0)
}

/// Rate envelope check for the analyzed schedules, using the empirical
/// second-moment constant from the ensemble.
pub fn check_envelope(
    kind: ScheduleKind,
    stats: &EnsembleStats,
    reference: &Reference,
    beta: f64,
    sigma: f64,
) -> CheckReport {
    let name = match kind {
        ScheduleKind::Sqrt => "envelope_sqrt",
        ScheduleKind::Log => "envelope_log",
        _ => "envelope",
    };
    let psi = reference.psi();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..stats.iters.len() {
        let env = envelope(kind, psi, stats.g2_max, beta, sigma, stats.iters[i]);
        worst = worst.max(stats.mean_gap[i] - (env + 3.0 * stats.se_gap[i]));
    }
    CheckReport::from_margin(name, -worst, 0.0)
}

/// Ordinary least squares of `log(mean gap)` against `log(k + 1)` over the
/// given iteration window. Returns the slope and its standard error.
/// Iterations whose mean gap is nonpositive are dropped (they are already
/// below the reference); fewer than three usable points is an error.
pub fn rate_slope(traces: &[Trace], f_star: f64, window: (usize, usize)) -> Result<(f64, f64)> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Config("empty trace ensemble".into()))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, p) in first.points.iter().enumerate() {
        if p.iter < window.0 || p.iter > window.1 {
            continue;
        }
        let mean_obj: f64 =
            traces.iter().map(|t| t.points[idx].objective).sum::<f64>() / traces.len() as f64;
        let mean_gap = mean_obj - f_star;
        if mean_gap > 0.0 {
            xs.push(((p.iter + 1) as f64).ln());
            ys.push(mean_gap.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::RateNotMeasurable(format!(
            "only {} positive mean-gap points in window [{}, {}]",
            xs.len(),
            window.0,
            window.1
        )));
    }
    Ok(ols_slope(&xs, &ys))
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let dof = (xs.len().max(3) - 2) as f64;
    let se = (ssr / dof / sxx).sqrt();
    (slope, se)
}

/// Slope check: the fitted log-log slope over `window` must be at most
/// `threshold`.
pub fn check_rate_slope(
    name: &str,
    traces: &[Trace],
    f_star: f64,
    window: (usize, usize),
    threshold: f64,
) -> Result<CheckReport> {
    let (slope, _se) = rate_slope(traces, f_star, window)?;
    Ok(CheckReport::from_margin(name, threshold - slope, threshold))
}
