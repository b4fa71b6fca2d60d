//! Multi-trial experiment runner.
//!
//! `run_bench` reproduces the robust-regression comparison: the
//! quasi-monotone method under the square-root schedule (rqm_a), under the
//! aggressive quadratic-weights schedule (rqm_b), and the extrapolated
//! subgradient comparator (srsg), each over `trials` independent seeds. It
//! writes one long-format CSV (method, trial, iter, objective) for plotting
//! and one summary CSV (method, iter, mean, std). Trial `t` uses seed
//! `seed + t`, so serial and parallel execution produce identical bytes.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::DataSet;
use crate::error::{Error, Result};
use crate::oracle::HuberRegressionProblem;
use crate::schedule::Schedule;
use crate::seeded_rng;
use crate::solver::{rqm_run, srsg_run};
use crate::trace::{Trace, TraceOptions};

/// Full experiment configuration. Defaults follow the benchmark setup:
/// `delta = 2`, `lambda = 0.1`, 100 trials of 5000 iterations, batch 1.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub iters: usize,
    pub trials: u64,
    pub seed: u64,
    pub delta: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub batch: usize,
    pub stride: usize,
    /// Worker threads for trial fan-out: 0 uses all cores, 1 forces serial.
    pub threads: usize,
    /// Constant gamma for the quadratic-weights schedule.
    pub quadratic_gamma: f64,
    /// Also emit a gnuplot script next to the CSVs.
    pub gnuplot: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            iters: 5000,
            trials: 100,
            seed: 42,
            delta: 2.0,
            lambda: 0.1,
            sigma: 0.0,
            batch: 1,
            stride: 10,
            threads: 0,
            quadratic_gamma: crate::schedule::DEFAULT_QUADRATIC_GAMMA,
            gnuplot: false,
        }
    }
}

/// What one method run looks like in the summary.
#[derive(Debug, Clone)]
pub struct MethodCurve {
    pub method: String,
    pub iters: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-method mean/std curves plus total wall time and any trial failures.
#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub curves: Vec<MethodCurve>,
    pub wall_ns: u128,
    pub failures: Vec<String>,
}

enum MethodSpec {
    Rqm(Schedule),
    Srsg,
}

/// Runs one method for `trials` trials with per-trial seeds `seed + t`.
/// Results come back in trial order regardless of the thread count.
fn run_trials(
    problem: &HuberRegressionProblem,
    spec: &MethodSpec,
    name: &str,
    cfg: &ExperimentConfig,
    opts: &TraceOptions,
) -> Result<Vec<Trace>> {
    let one = |t: u64| -> Result<Trace> {
        let mut rng = seeded_rng(cfg.seed + t);
        let mut trace = match spec {
            MethodSpec::Rqm(schedule) => rqm_run(problem, schedule, cfg.iters, &mut rng, opts)?,
            MethodSpec::Srsg => srsg_run(problem, cfg.iters, &mut rng, opts)?,
        };
        trace.trial = t;
        trace.method = name.to_string();
        Ok(trace)
    };
    match cfg.threads {
        1 => (0..cfg.trials).map(one).collect(),
        0 => (0..cfg.trials).into_par_iter().map(one).collect(),
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| (0..cfg.trials).into_par_iter().map(one).collect())
        }
    }
}

/// Runs the quasi-monotone method under one schedule for `trials` trials.
pub fn run_rqm_trials(
    problem: &HuberRegressionProblem,
    schedule: &Schedule,
    cfg: &ExperimentConfig,
    opts: &TraceOptions,
) -> Result<Vec<Trace>> {
    run_trials(problem, &MethodSpec::Rqm(schedule.clone()), "rqm", cfg, opts)
}

/// Runs the extrapolated comparator for `trials` trials.
pub fn run_srsg_trials(
    problem: &HuberRegressionProblem,
    cfg: &ExperimentConfig,
    opts: &TraceOptions,
) -> Result<Vec<Trace>> {
    run_trials(problem, &MethodSpec::Srsg, "srsg", cfg, opts)
}

fn summarize(name: &str, traces: &[Trace]) -> Result<MethodCurve> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Config("no trials".into()))?;
    let n = traces.len() as f64;
    let mut curve = MethodCurve {
        method: name.to_string(),
        iters: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
    };
    for (idx, p) in first.points.iter().enumerate() {
        let mut mean = 0.0;
        for t in traces {
            if t.points.len() != first.points.len() {
                return Err(Error::Config(
                    "trial traces have mismatched recording grids".into(),
                ));
            }
            mean += t.points[idx].objective;
        }
        mean /= n;
        // Unbiased sample standard deviation; defined as 0 for a single trial.
        let std = if traces.len() > 1 {
            (traces
                .iter()
                .map(|t| {
                    let d = t.points[idx].objective - mean;
                    d * d
                })
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        curve.iters.push(p.iter);
        curve.mean.push(mean);
        curve.std.push(std);
    }
    Ok(curve)
}

pub const BENCH_LONG_CSV: &str = "bench_long.csv";
pub const BENCH_SUMMARY_CSV: &str = "bench_summary.csv";
pub const BENCH_PLOT_GP: &str = "bench_plot.gp";

/// Runs the three-method comparison and writes `bench_long.csv` and
/// `bench_summary.csv` (and optionally a gnuplot script) under `out_dir`.
/// Byte-identical output for identical configurations, serial or parallel.
pub fn run_bench(data: &Arc<DataSet>, cfg: &ExperimentConfig, out_dir: &Path) -> Result<BenchSummary> {
    let start = Instant::now();
    let opts = TraceOptions {
        stride: cfg.stride,
        reference: None,
    };
    let problem = HuberRegressionProblem::new(
        data.clone(),
        cfg.delta,
        cfg.lambda,
        cfg.sigma,
        cfg.batch,
    )?;
    if cfg.sigma != 0.0 {
        return Err(Error::Config(
            "the three-method comparison runs the plain l1 objective; use sigma = 0".into(),
        ));
    }

    let methods: Vec<(&str, MethodSpec)> = vec![
        ("rqm_a", MethodSpec::Rqm(Schedule::sqrt(cfg.sigma))),
        (
            "rqm_b",
            MethodSpec::Rqm(Schedule::quadratic_with_gamma(cfg.sigma, cfg.quadratic_gamma)?),
        ),
        ("srsg", MethodSpec::Srsg),
    ];

    let mut all: Vec<(&str, Vec<Trace>)> = Vec::new();
    let mut failures = Vec::new();
    for (name, spec) in &methods {
        let traces = run_trials(&problem, spec, name, cfg, &opts)?;
        for t in &traces {
            if let Some(f) = &t.failure {
                failures.push(format!("{name} trial {}: {f}", t.trial));
            }
        }
        all.push((name, traces));
    }

    fs::create_dir_all(out_dir)?;
    let long_path = out_dir.join(BENCH_LONG_CSV);
    let mut long = BufWriter::new(fs::File::create(&long_path)?);
    writeln!(long, "method,trial,iter,objective")?;
    for (name, traces) in &all {
        for t in traces {
            for p in &t.points {
                writeln!(long, "{name},{},{},{}", t.trial, p.iter, p.objective)?;
            }
        }
    }
    long.flush()?;

    let mut curves = Vec::new();
    let summary_path = out_dir.join(BENCH_SUMMARY_CSV);
    let mut summary = BufWriter::new(fs::File::create(&summary_path)?);
    writeln!(summary, "method,iter,mean,std")?;
    for (name, traces) in &all {
        let curve = summarize(name, traces)?;
        for i in 0..curve.iters.len() {
            writeln!(
                summary,
                "{name},{},{},{}",
                curve.iters[i], curve.mean[i], curve.std[i]
            )?;
        }
        curves.push(curve);
    }
    summary.flush()?;

    if cfg.gnuplot {
        write_gnuplot(&out_dir.join(BENCH_PLOT_GP))?;
    }

    Ok(BenchSummary {
        curves,
        wall_ns: start.elapsed().as_nanos(),
        failures,
    })
}

/// A minimal gnuplot script reading the summary CSV and drawing mean curves
/// with one-standard-deviation bands.
fn write_gnuplot(path: &PathBuf) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set logscale y")?;
    writeln!(out, "set xlabel 'iteration'")?;
    writeln!(out, "set ylabel 'objective'")?;
    writeln!(out, "set key top right")?;
    writeln!(
        out,
        "plot for [m in 'rqm_a rqm_b srsg'] '{}' using 2:(strcol(1) eq m ? $3 : 1/0) with lines title m, \\",
        BENCH_SUMMARY_CSV
    )?;
    writeln!(
        out,
        "     for [m in 'rqm_a rqm_b srsg'] '' using 2:(strcol(1) eq m ? $3+$4 : 1/0) with lines notitle dashtype 3, \\"
    )?;
    writeln!(
        out,
        "     for [m in 'rqm_a rqm_b srsg'] '' using 2:(strcol(1) eq m ? $3-$4 : 1/0) with lines notitle dashtype 3"
    )?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenConfig};

    fn tiny_cfg() -> ExperimentConfig {
        ExperimentConfig {
            iters: 50,
            trials: 3,
            seed: 7,
            stride: 10,
            threads: 1,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_trial_has_zero_std() {
        let data = Arc::new(generate(&GenConfig::new(2, 40, 3, 2)).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            trials: 1,
            ..tiny_cfg()
        };
        let summary = run_bench(&data, &cfg, dir.path()).unwrap();
        for curve in &summary.curves {
            assert!(curve.std.iter().all(|s| *s == 0.0));
        }
        assert!(summary.failures.is_empty());
    }

    #[test]
    fn bench_outputs_are_deterministic() {
        let data = Arc::new(generate(&GenConfig::new(2, 40, 3, 2)).unwrap());
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg();
        run_bench(&data, &cfg, d1.path()).unwrap();
        run_bench(&data, &cfg, d2.path()).unwrap();
        for f in [BENCH_LONG_CSV, BENCH_SUMMARY_CSV] {
            assert_eq!(
                fs::read(d1.path().join(f)).unwrap(),
                fs::read(d2.path().join(f)).unwrap(),
                "{f} differs between identical runs"
            );
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let data = Arc::new(generate(&GenConfig::new(3, 40, 3, 2)).unwrap());
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_bench(&data, &tiny_cfg(), d1.path()).unwrap();
        run_bench(
            &data,
            &ExperimentConfig {
                threads: 2,
                ..tiny_cfg()
            },
            d2.path(),
        )
        .unwrap();
        for f in [BENCH_LONG_CSV, BENCH_SUMMARY_CSV] {
            assert_eq!(
                fs::read(d1.path().join(f)).unwrap(),
                fs::read(d2.path().join(f)).unwrap(),
                "{f} differs between serial and parallel"
            );
        }
    }
}
