//! Command-line front end: data generation, solver runs, the three-method
//! benchmark, and the runtime verification suite.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rqm::bench::{run_bench, run_rqm_trials, run_srsg_trials, ExperimentConfig};
use rqm::datagen::{generate, read_csv, write_csv, GenConfig};
use rqm::diagnostics::{self, CheckReport};
use rqm::error::{Error, Result};
use rqm::oracle::HuberRegressionProblem;
use rqm::schedule::Schedule;
use rqm::trace::{write_trace_csv, TraceOptions};

#[derive(Parser)]
#[command(
    name = "rqm",
    version,
    about = "Last-iterate stochastic composite solvers on robust l1-regularized regression"
)]
struct Cli {
    /// Base random seed; trial t derives its stream from seed + t.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory receiving output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Record every Nth iteration in traces and summaries.
    #[arg(long, global = true, default_value_t = 10)]
    stride: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic sparse-regression dataset (CSV plus JSON sidecar).
    Gen(GenArgs),
    /// Run one solver over one or more trials and write a trace CSV.
    Solve(SolveArgs),
    /// Run the three-method comparison and write long/summary CSVs.
    Bench(BenchArgs),
    /// Run the runtime verification suite and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Number of nonzero ground-truth coefficients.
    #[arg(long, default_value_t = 4)]
    nnz: usize,
    #[arg(long, default_value = "data.csv")]
    out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    outlier_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 5.0)]
    outlier_std: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rqm,
    Srsg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    /// Unit weights, gamma_k = sqrt(k+1).
    Cor1,
    /// Unit weights, gamma_k = ln(2k+3).
    Cor2,
    /// Weights a_k = k with constant gamma.
    Quadratic,
    /// Gamma table from --custom-gamma-file (unit weights).
    Custom,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Schedule for the quasi-monotone method (ignored by srsg, which has its
    /// own fixed parameter laws).
    #[arg(long, value_enum, default_value = "cor1")]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Constant gamma for the quadratic schedule.
    #[arg(long, default_value_t = 10.0)]
    gamma_const: f64,
    /// File with one gamma value per line for the custom schedule.
    #[arg(long)]
    custom_gamma_file: Option<PathBuf>,
    /// Compute a certified reference solution with this iteration budget so
    /// traces carry gap and bound columns (omitted: columns are NaN).
    #[arg(long)]
    ref_budget: Option<usize>,
    /// Worker threads for trial fan-out (0 = all cores, 1 = serial).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 10.0)]
    gamma_const: f64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also emit a gnuplot script for the summary CSV.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    All,
    Prox,
    Phi,
    Lyapunov,
    Bound,
    Rate,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    check: CheckArg,
    /// Dataset for the solver-level checks (lyapunov, bound, rate).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Iterations for the deterministic checks.
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Trials for the stochastic rate checks.
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Iterations for the stochastic rate checks; the slope window is the
    /// last 90% of it.
    #[arg(long, default_value_t = 5000)]
    rate_iters: usize,
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Initial budget for the certified reference solution.
    #[arg(long, default_value_t = 20_000)]
    ref_budget: usize,
    #[arg(long, default_value = "verify_report.json")]
    report: PathBuf,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out_dir)?;
    match &cli.cmd {
        Cmd::Gen(args) => cmd_gen(&cli, args),
        Cmd::Solve(args) => cmd_solve(&cli, args),
        Cmd::Bench(args) => cmd_bench(&cli, args),
        Cmd::Verify(args) => cmd_verify(&cli, args),
    }
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<()> {
    let cfg = GenConfig {
        seed: cli.seed,
        n_samples: args.n,
        dim: args.dim,
        nnz: args.nnz,
        outlier_prob: args.outlier_prob,
        noise_std_main: args.noise_std,
        noise_std_outlier: args.outlier_std,
    };
    let dataset = generate(&cfg)?;
    let path = cli.out_dir.join(&args.out);
    write_csv(&dataset, &path)?;
    println!(
        "wrote {} samples (dim {}, nnz {}) to {} (+ sidecar)",
        args.n,
        args.dim,
        args.nnz,
        path.display()
    );
    Ok(())
}

fn build_schedule(kind: ScheduleArg, sigma: f64, gamma_const: f64, custom_gamma_file: Option<&PathBuf>) -> Result<Schedule> {
    match kind {
        ScheduleArg::Cor1 => Ok(Schedule::sqrt(sigma)),
        ScheduleArg::Cor2 => Ok(Schedule::log(sigma)),
        ScheduleArg::Quadratic => Schedule::quadratic_with_gamma(sigma, gamma_const),
        ScheduleArg::Custom => {
            let path = custom_gamma_file.ok_or_else(|| {
                Error::Config("--schedule custom requires --custom-gamma-file".into())
            })?;
            let text = fs::read_to_string(path)?;
            let mut gammas = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                gammas.push(line.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("not a number: `{line}`"),
                })?);
            }
            Schedule::custom(vec![1.0; gammas.len()], gammas, sigma)
        }
    }
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> Result<()> {
    let data = Arc::new(read_csv(&args.data)?);
    let problem =
        HuberRegressionProblem::new(data, args.delta, args.lambda, args.sigma, args.batch)?;
    let reference = match args.ref_budget {
        Some(budget) => Some(diagnostics::certified_reference(&problem, budget, 6)?),
        None => None,
    };
    let opts = TraceOptions {
        stride: cli.stride,
        reference,
    };
    let cfg = ExperimentConfig {
        iters: args.iters,
        trials: args.trials,
        seed: cli.seed,
        delta: args.delta,
        lambda: args.lambda,
        sigma: args.sigma,
        batch: args.batch,
        stride: cli.stride,
        threads: args.threads,
        quadratic_gamma: args.gamma_const,
        gnuplot: false,
    };
    let traces = match args.method {
        MethodArg::Rqm => {
            let schedule = build_schedule(
                args.schedule,
                args.sigma,
                args.gamma_const,
                args.custom_gamma_file.as_ref(),
            )?;
            run_rqm_trials(&problem, &schedule, &cfg, &opts)?
        }
        MethodArg::Srsg => run_srsg_trials(&problem, &cfg, &opts)?,
    };
    let out = cli.out_dir.join(&args.out);
    write_trace_csv(&out, &traces)?;
    let failures: Vec<&Trace> = traces.iter().filter(|t| t.failure.is_some()).collect();
    println!(
        "wrote {} trials x {} iters to {}",
        args.trials,
        args.iters,
        out.display()
    );
    if let Some(t) = failures.first() {
        return Err(Error::Numerical {
            iter: t.points.len(),
            msg: format!(
                "{} of {} trials failed; first: {}",
                failures.len(),
                args.trials,
                t.failure.clone().unwrap_or_default()
            ),
        });
    }
    Ok(())
}

use rqm::trace::Trace;

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<()> {
    let data = Arc::new(read_csv(&args.data)?);
    let cfg = ExperimentConfig {
        iters: args.iters,
        trials: args.trials,
        seed: cli.seed,
        delta: args.delta,
        lambda: args.lambda,
        sigma: 0.0,
        batch: args.batch,
        stride: cli.stride,
        threads: args.threads,
        quadratic_gamma: args.gamma_const,
        gnuplot: args.gnuplot,
    };
    let summary = run_bench(&data, &cfg, &cli.out_dir)?;
    for curve in &summary.curves {
        println!(
            "{}: final mean objective {} (std {})",
            curve.method,
            curve.mean.last().unwrap_or(&f64::NAN),
            curve.std.last().unwrap_or(&f64::NAN)
        );
    }
    println!(
        "wrote {} and {} in {} ({:.1} s)",
        rqm::bench::BENCH_LONG_CSV,
        rqm::bench::BENCH_SUMMARY_CSV,
        cli.out_dir.display(),
        summary.wall_ns as f64 / 1e9
    );
    if !summary.failures.is_empty() {
        return Err(Error::Numerical {
            iter: 0,
            msg: format!("{} trial(s) failed: {}", summary.failures.len(), summary.failures.join("; ")),
        });
    }
    Ok(())
}

fn load_verify_problem(args: &VerifyArgs) -> Result<HuberRegressionProblem> {
    let path = args.data.as_ref().ok_or_else(|| {
        Error::Config("this check needs --data (a dataset from `rqm gen`)".into())
    })?;
    let data = Arc::new(read_csv(path)?);
    HuberRegressionProblem::new(data, args.delta, args.lambda, args.sigma, args.batch)
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<()> {
    let mut reports: Vec<CheckReport> = Vec::new();
    let wants = |c: CheckArg| args.check == CheckArg::All || args.check == c;

    if wants(CheckArg::Prox) {
        reports.push(diagnostics::check_prox_equivalence(1000, cli.seed));
    }
    if wants(CheckArg::Phi) {
        reports.push(diagnostics::check_phi_gradient(100, cli.seed + 1));
    }

    if wants(CheckArg::Lyapunov) {
        let problem = load_verify_problem(args)?;
        for schedule in [Schedule::sqrt(args.sigma), Schedule::log(args.sigma)] {
            let mut r =
                diagnostics::check_lyapunov(&problem, &schedule, args.iters, 10, cli.seed + 2)?;
            r.check = format!("{}_{:?}", r.check, schedule.kind).to_lowercase();
            reports.push(r);
        }
    }
    if wants(CheckArg::Bound) {
        let problem = load_verify_problem(args)?;
        let reference = diagnostics::certified_reference(&problem, args.ref_budget, 6)?;
        for schedule in [Schedule::sqrt(args.sigma), Schedule::log(args.sigma)] {
            let mut r =
                diagnostics::check_theorem_bound(&problem, &schedule, args.iters, &reference)?;
            r.check = format!("{}_{:?}", r.check, schedule.kind).to_lowercase();
            reports.push(r);
        }
    }
    if wants(CheckArg::Rate) {
        let problem = load_verify_problem(args)?;
        let reference = diagnostics::certified_reference(&problem, args.ref_budget, 6)?;
        let schedule = if args.sigma > 0.0 {
            Schedule::log(args.sigma)
        } else {
            Schedule::sqrt(0.0)
        };
        let cfg = ExperimentConfig {
            iters: args.rate_iters,
            trials: args.trials,
            seed: cli.seed,
            delta: args.delta,
            lambda: args.lambda,
            sigma: args.sigma,
            batch: args.batch,
            stride: cli.stride,
            threads: args.threads,
            quadratic_gamma: 10.0,
            gnuplot: false,
        };
        let opts = TraceOptions {
            stride: cli.stride,
            reference: Some(reference.clone()),
        };
        let traces = run_rqm_trials(&problem, &schedule, &cfg, &opts)?;
        let stats = diagnostics::ensemble_stats(&traces)?;
        reports.push(diagnostics::check_stochastic_bound(&stats));
        reports.push(diagnostics::check_envelope(
            schedule.kind,
            &stats,
            &reference,
            schedule.beta,
            args.sigma,
        ));
        let window = (args.rate_iters / 10, args.rate_iters);
        let threshold = if args.sigma > 0.0 {
            diagnostics::SLOPE_THRESHOLD_LOG
        } else {
            diagnostics::SLOPE_THRESHOLD_SQRT
        };
        reports.push(diagnostics::check_rate_slope(
            "rate_slope",
            &traces,
            reference.objective,
            window,
            threshold,
        )?);
    }

    for r in &reports {
        println!(
            "{}: {} (margin {:+.3e}, tolerance {:e})",
            r.check,
            if r.pass { "PASS" } else { "FAIL" },
            r.margin,
            r.tolerance
        );
    }
    let report_path = cli.out_dir.join(&args.report);
    let json = serde_json::to_string_pretty(&reports)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    fs::write(&report_path, json)?;
    println!("wrote {}", report_path.display());

    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.check.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::CheckFailed(failed.join(", ")))
    }
}
