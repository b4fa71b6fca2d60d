//! Python bindings: the closed-form prox operators, schedules, data
//! generation, both solvers, and the reference/rate diagnostics.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use rqm::bench::{run_rqm_trials, run_srsg_trials, ExperimentConfig};
use rqm::datagen::{self, GenConfig};
use rqm::diagnostics;
use rqm::oracle::HuberRegressionProblem;
use rqm::schedule::{Schedule, ScheduleKind};
use rqm::trace::{Reference, TraceOptions};

fn to_py_err(e: rqm::Error) -> PyErr {
    match e {
        rqm::Error::Io(err) => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_schedule(kind: &str, sigma: f64, gamma_const: f64) -> PyResult<Schedule> {
    let kind: ScheduleKind = kind.parse().map_err(to_py_err)?;
    Ok(match kind {
        ScheduleKind::Sqrt => Schedule::sqrt(sigma),
        ScheduleKind::Log => Schedule::log(sigma),
        ScheduleKind::Quadratic => {
            Schedule::quadratic_with_gamma(sigma, gamma_const).map_err(to_py_err)?
        }
        ScheduleKind::Custom => {
            return Err(PyValueError::new_err(
                "custom schedules are not exposed through the bindings",
            ))
        }
    })
}

/// A synthetic sparse-regression dataset.
#[pyclass(frozen)]
struct Dataset {
    inner: Arc<datagen::DataSet>,
}

#[pymethods]
impl Dataset {
    /// Generate a dataset: uniform inputs on [-5, 5], `nnz` nonzero
    /// coefficients, Gaussian noise with occasional outliers.
    #[staticmethod]
    #[pyo3(signature = (seed, n=10_000, dim=10, nnz=4, outlier_prob=0.05, noise_std=1.0, outlier_std=5.0))]
    fn generate(
        seed: u64,
        n: usize,
        dim: usize,
        nnz: usize,
        outlier_prob: f64,
        noise_std: f64,
        outlier_std: f64,
    ) -> PyResult<Self> {
        let cfg = GenConfig {
            seed,
            n_samples: n,
            dim,
            nnz,
            outlier_prob,
            noise_std_main: noise_std,
            noise_std_outlier: outlier_std,
        };
        Ok(Dataset {
            inner: Arc::new(datagen::generate(&cfg).map_err(to_py_err)?),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Dataset {
            inner: Arc::new(datagen::read_csv(&path).map_err(to_py_err)?),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        datagen::write_csv(&self.inner, &path).map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Ground-truth parameter vector (coefficients then intercept), or None
    /// when the dataset was loaded without its sidecar.
    #[getter]
    fn true_theta(&self) -> Option<Vec<f64>> {
        self.inner.true_theta()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, dim={})", self.inner.n_samples(), self.inner.dim())
    }
}

/// Recorded objective curve of one trial.
#[pyclass(frozen)]
struct Trace {
    #[pyo3(get)]
    trial: u64,
    #[pyo3(get)]
    iters: Vec<usize>,
    #[pyo3(get)]
    objective: Vec<f64>,
    #[pyo3(get)]
    gap: Vec<f64>,
    #[pyo3(get)]
    bound: Vec<f64>,
    #[pyo3(get)]
    b_hat: Vec<f64>,
    #[pyo3(get)]
    g2_max: f64,
}

impl From<rqm::trace::Trace> for Trace {
    fn from(t: rqm::trace::Trace) -> Self {
        Trace {
            trial: t.trial,
            iters: t.points.iter().map(|p| p.iter).collect(),
            objective: t.points.iter().map(|p| p.objective).collect(),
            gap: t.points.iter().map(|p| p.gap).collect(),
            bound: t.points.iter().map(|p| p.bound).collect(),
            b_hat: t.points.iter().map(|p| p.b_hat).collect(),
            g2_max: t.g2_max,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_problem(
    data: &Dataset,
    delta: f64,
    lambda: f64,
    sigma: f64,
    batch: usize,
) -> PyResult<HuberRegressionProblem> {
    HuberRegressionProblem::new(data.inner.clone(), delta, lambda, sigma, batch).map_err(to_py_err)
}

/// Minimizer of `<s, x> + A*(lambda*||x||_1 + sigma/2*||x||^2) + gamma/2*||x||^2`.
#[pyfunction]
#[pyo3(signature = (s, a_sum, lambda_, sigma, gamma))]
fn rqm_prox(s: Vec<f64>, a_sum: f64, lambda_: f64, sigma: f64, gamma: f64) -> PyResult<Vec<f64>> {
    rqm::prox::rqm_prox(&s, a_sum, lambda_, sigma, gamma).map_err(to_py_err)
}

/// Minimizer of `<w, x> + lambda*||x||_1 + gamma/2*||x - y||^2`.
#[pyfunction]
#[pyo3(signature = (w, y, lambda_, gamma))]
fn srsg_prox(w: Vec<f64>, y: Vec<f64>, lambda_: f64, gamma: f64) -> PyResult<Vec<f64>> {
    rqm::prox::srsg_prox(&w, &y, lambda_, gamma).map_err(to_py_err)
}

/// Value and maximizer of the conjugate-style auxiliary function.
#[pyfunction]
#[pyo3(signature = (s, a_sum, lambda_, sigma, gamma))]
fn phi_eval(
    s: Vec<f64>,
    a_sum: f64,
    lambda_: f64,
    sigma: f64,
    gamma: f64,
) -> PyResult<(f64, Vec<f64>)> {
    rqm::prox::phi_eval(&s, a_sum, lambda_, sigma, gamma).map_err(to_py_err)
}

#[pyfunction]
fn huber_value(z: f64, delta: f64) -> f64 {
    rqm::oracle::huber_value(z, delta)
}

#[pyfunction]
fn huber_subgradient(z: f64, delta: f64) -> f64 {
    rqm::oracle::huber_subgradient(z, delta)
}

/// `(a_k, A_k)` for a schedule kind (`cor1`, `cor2`, `quadratic`).
#[pyfunction]
#[pyo3(signature = (kind, k, sigma=0.0, gamma_const=10.0))]
fn schedule_weights(kind: &str, k: usize, sigma: f64, gamma_const: f64) -> PyResult<(f64, f64)> {
    Ok(parse_schedule(kind, sigma, gamma_const)?.weights(k))
}

/// `gamma_k` for a schedule kind.
#[pyfunction]
#[pyo3(signature = (kind, k, sigma=0.0, gamma_const=10.0))]
fn schedule_gamma(kind: &str, k: usize, sigma: f64, gamma_const: f64) -> PyResult<f64> {
    Ok(parse_schedule(kind, sigma, gamma_const)?.gamma(k))
}

fn experiment_config(
    iters: usize,
    trials: u64,
    seed: u64,
    delta: f64,
    lambda: f64,
    sigma: f64,
    batch: usize,
    stride: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        iters,
        trials,
        seed,
        delta,
        lambda,
        sigma,
        batch,
        stride,
        ..ExperimentConfig::default()
    }
}

/// Run the quasi-monotone solver for `trials` trials (seeds `seed + t`).
/// `reference` is an optional `(x_ref, f_ref)` pair enabling the gap/bound
/// columns.
#[pyfunction]
#[pyo3(signature = (data, schedule="cor1", iters=5000, trials=1, seed=42, delta=2.0,
                    lambda_=0.1, sigma=0.0, batch=1, stride=10, gamma_const=10.0,
                    reference=None))]
#[allow(clippy::too_many_arguments)]
fn run_rqm(
    data: &Dataset,
    schedule: &str,
    iters: usize,
    trials: u64,
    seed: u64,
    delta: f64,
    lambda_: f64,
    sigma: f64,
    batch: usize,
    stride: usize,
    gamma_const: f64,
    reference: Option<(Vec<f64>, f64)>,
) -> PyResult<Vec<Trace>> {
    let problem = build_problem(data, delta, lambda_, sigma, batch)?;
    let schedule = parse_schedule(schedule, sigma, gamma_const)?;
    let cfg = experiment_config(iters, trials, seed, delta, lambda_, sigma, batch, stride);
    let opts = TraceOptions {
        stride,
        reference: reference.map(|(x, objective)| Reference { x, objective }),
    };
    let traces = run_rqm_trials(&problem, &schedule, &cfg, &opts).map_err(to_py_err)?;
    Ok(traces.into_iter().map(Trace::from).collect())
}

/// Run the extrapolated subgradient comparator (plain l1 objective only).
#[pyfunction]
#[pyo3(signature = (data, iters=5000, trials=1, seed=42, delta=2.0, lambda_=0.1,
                    batch=1, stride=10, reference=None))]
#[allow(clippy::too_many_arguments)]
fn run_srsg(
    data: &Dataset,
    iters: usize,
    trials: u64,
    seed: u64,
    delta: f64,
    lambda_: f64,
    batch: usize,
    stride: usize,
    reference: Option<(Vec<f64>, f64)>,
) -> PyResult<Vec<Trace>> {
    let problem = build_problem(data, delta, lambda_, 0.0, batch)?;
    let cfg = experiment_config(iters, trials, seed, delta, lambda_, 0.0, batch, stride);
    let opts = TraceOptions {
        stride,
        reference: reference.map(|(x, objective)| Reference { x, objective }),
    };
    let traces = run_srsg_trials(&problem, &cfg, &opts).map_err(to_py_err)?;
    Ok(traces.into_iter().map(Trace::from).collect())
}

/// Certified reference solution `(x_ref, f_ref)` from a deterministic
/// full-batch run with budget doubling.
#[pyfunction]
#[pyo3(signature = (data, budget=10_000, delta=2.0, lambda_=0.1, sigma=0.0, max_doublings=6))]
fn reference_solution(
    data: &Dataset,
    budget: usize,
    delta: f64,
    lambda_: f64,
    sigma: f64,
    max_doublings: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let problem = build_problem(data, delta, lambda_, sigma, 1)?;
    let r = diagnostics::certified_reference(&problem, budget, max_doublings).map_err(to_py_err)?;
    Ok((r.x, r.objective))
}

/// Exact objective `F(theta)` on a dataset.
#[pyfunction]
#[pyo3(signature = (data, theta, delta=2.0, lambda_=0.1, sigma=0.0))]
fn full_objective(
    data: &Dataset,
    theta: Vec<f64>,
    delta: f64,
    lambda_: f64,
    sigma: f64,
) -> PyResult<f64> {
    let problem = build_problem(data, delta, lambda_, sigma, 1)?;
    problem.full_objective(&theta).map_err(to_py_err)
}

/// OLS slope (and standard error) of `log(gap)` against `log(k+1)`.
#[pyfunction]
fn fit_rate_slope(iters: Vec<usize>, mean_gap: Vec<f64>, lo: usize, hi: usize) -> PyResult<(f64, f64)> {
    if iters.len() != mean_gap.len() {
        return Err(PyValueError::new_err("iters and mean_gap lengths differ"));
    }
    let points: Vec<(usize, f64)> = iters.into_iter().zip(mean_gap).collect();
    let trace = rqm::trace::Trace {
        trial: 0,
        method: "py".into(),
        points: points
            .iter()
            .map(|&(iter, gap)| rqm::trace::TracePoint {
                iter,
                objective: gap,
                gap,
                bound: f64::NAN,
                b_hat: f64::NAN,
                gamma_over_a: f64::NAN,
                wall_ns: 0,
            })
            .collect(),
        g2_max: 0.0,
        g2_mean: 0.0,
        failure: None,
    };
    diagnostics::rate_slope(&[trace], 0.0, (lo, hi)).map_err(to_py_err)
}

#[pymodule]
fn rqm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(rqm_prox, m)?)?;
    m.add_function(wrap_pyfunction!(srsg_prox, m)?)?;
    m.add_function(wrap_pyfunction!(phi_eval, m)?)?;
    m.add_function(wrap_pyfunction!(huber_value, m)?)?;
    m.add_function(wrap_pyfunction!(huber_subgradient, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_weights, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(run_rqm, m)?)?;
    m.add_function(wrap_pyfunction!(run_srsg, m)?)?;
    m.add_function(wrap_pyfunction!(reference_solution, m)?)?;
    m.add_function(wrap_pyfunction!(full_objective, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate_slope, m)?)?;
    Ok(())
}
