// Development probe for acceptance-scale experiments. Not part of the API.

use std::sync::Arc;
use std::time::Instant;

use rqm::bench::{run_bench, run_rqm_trials, ExperimentConfig};
use rqm::datagen::{generate, GenConfig};
use rqm::diagnostics as diag;
use rqm::oracle::HuberRegressionProblem;
use rqm::schedule::Schedule;
use rqm::trace::TraceOptions;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "prox" || which == "all" {
        let t0 = Instant::now();
        let r = diag::check_prox_equivalence(1000, 42);
        println!("prox: pass={} margin={:.3e} in {:?}", r.pass, r.margin, t0.elapsed());
        let t0 = Instant::now();
        let r = diag::check_phi_gradient(100, 43);
        println!("phi:  pass={} margin={:.3e} in {:?}", r.pass, r.margin, t0.elapsed());
    }

    if which == "det" || which == "all" {
        // criteria 3/4 scale: d=3, N=50
        let data = Arc::new(generate(&GenConfig::new(7, 50, 3, 2)).unwrap());
        let p = HuberRegressionProblem::new(data, 2.0, 0.1, 0.0, 1).unwrap();
        let t0 = Instant::now();
        let reference = diag::certified_reference(&p, 10_000, 6).unwrap();
        println!(
            "det reference: F*={:.6} |x|={:?} in {:?}",
            reference.objective,
            reference.x.len(),
            t0.elapsed()
        );
        for sched in [Schedule::sqrt(0.0), Schedule::log(0.0)] {
            let t0 = Instant::now();
            let r = diag::check_lyapunov(&p, &sched, 1000, 10, 11).unwrap();
            println!(
                "lyapunov {:?}: pass={} margin={:.3e} in {:?}",
                sched.kind, r.pass, r.margin, t0.elapsed()
            );
            let t0 = Instant::now();
            let r = diag::check_theorem_bound(&p, &sched, 1001, &reference).unwrap();
            println!(
                "bound {:?}: pass={} margin={:.3e} in {:?}",
                sched.kind, r.pass, r.margin, t0.elapsed()
            );
        }
    }

    if which == "cor1" || which == "all" {
        let data = Arc::new(generate(&GenConfig::new(42, 2000, 10, 4)).unwrap());
        let p = HuberRegressionProblem::new(data, 2.0, 0.1, 0.0, 1).unwrap();
        let t0 = Instant::now();
        let reference = diag::certified_reference(&p, 10_000, 10).unwrap();
        println!("cor1 reference: F*={:.6} in {:?}", reference.objective, t0.elapsed());
        let cfg = ExperimentConfig {
            iters: 5000,
            trials: 100,
            seed: 42,
            ..ExperimentConfig::default()
        };
        let opts = TraceOptions {
            stride: 10,
            reference: Some(reference.clone()),
        };
        let t0 = Instant::now();
        let traces = run_rqm_trials(&p, &Schedule::sqrt(0.0), &cfg, &opts).unwrap();
        println!("cor1 trials in {:?}", t0.elapsed());
        let stats = diag::ensemble_stats(&traces).unwrap();
        println!("  g2_max={:.3e}", stats.g2_max);
        for idx in [0usize, 1, 5, 10, 50, 100, 200, 300, 400, 500] {
            if idx < stats.iters.len() {
                println!(
                    "  k={} mean_gap={:.4e} se={:.2e} mean_bound={:.3e}",
                    stats.iters[idx], stats.mean_gap[idx], stats.se_gap[idx], stats.mean_bound[idx]
                );
            }
        }
        let r = diag::check_stochastic_bound(&stats);
        println!("  stoch bound: pass={} margin={:.3e}", r.pass, r.margin);
        let r = diag::check_envelope(rqm::schedule::ScheduleKind::Sqrt, &stats, &reference, 1.0, 0.0);
        println!("  envelope: pass={} margin={:.3e}", r.pass, r.margin);
        let (slope, se) = diag::rate_slope(&traces, reference.objective, (500, 5000)).unwrap();
        println!("  slope={:.4} se={:.4}", slope, se);
    }

    if which == "cor2" || which == "all" {
        let data = Arc::new(generate(&GenConfig::new(42, 2000, 10, 4)).unwrap());
        let p = HuberRegressionProblem::new(data, 2.0, 0.1, 0.1, 1).unwrap();
        let t0 = Instant::now();
        let reference = diag::certified_reference(&p, 10_000, 10).unwrap();
        println!("cor2 reference: F*={:.6} in {:?}", reference.objective, t0.elapsed());
        let cfg = ExperimentConfig {
            iters: 5000,
            trials: 100,
            seed: 42,
            sigma: 0.1,
            ..ExperimentConfig::default()
        };
        let opts = TraceOptions {
            stride: 10,
            reference: Some(reference.clone()),
        };
        let t0 = Instant::now();
        let traces = run_rqm_trials(&p, &Schedule::log(0.1), &cfg, &opts).unwrap();
        println!("cor2 trials in {:?}", t0.elapsed());
        let stats = diag::ensemble_stats(&traces).unwrap();
        println!("  g2_max={:.3e}", stats.g2_max);
        for idx in [0usize, 1, 5, 10, 50, 100, 200, 300, 400, 500] {
            if idx < stats.iters.len() {
                println!(
                    "  k={} mean_gap={:.4e} se={:.2e}",
                    stats.iters[idx], stats.mean_gap[idx], stats.se_gap[idx]
                );
            }
        }
        let r = diag::check_stochastic_bound(&stats);
        println!("  stoch bound: pass={} margin={:.3e}", r.pass, r.margin);
        let r = diag::check_envelope(rqm::schedule::ScheduleKind::Log, &stats, &reference, 1.0, 0.1);
        println!("  envelope: pass={} margin={:.3e}", r.pass, r.margin);
        let (slope, se) = diag::rate_slope(&traces, reference.objective, (500, 5000)).unwrap();
        println!("  slope={:.4} se={:.4}", slope, se);
    }

    if which == "fig" || which == "all" {
        let data = Arc::new(generate(&GenConfig::default()).unwrap());
        let dir = std::env::temp_dir().join("rqm_probe_fig");
        let t0 = Instant::now();
        let cfg = ExperimentConfig::default();
        let summary = run_bench(&data, &cfg, &dir).unwrap();
        println!("fig bench in {:?}", t0.elapsed());
        let mut finals = Vec::new();
        for c in &summary.curves {
            let f = *c.mean.last().unwrap();
            let at500 = c
                .iters
                .iter()
                .position(|&k| k == 500)
                .map(|i| c.mean[i])
                .unwrap();
            let first = c.mean[0];
            println!(
                "  {}: first={:.4e} at500={:.6e} final={:.6e}",
                c.method, first, at500, f
            );
            finals.push(f);
        }
        let fmax = finals.iter().cloned().fold(f64::MIN, f64::max);
        let fmin = finals.iter().cloned().fold(f64::MAX, f64::min);
        println!("  final spread: {:.4}% (5% allowed)", (fmax / fmin - 1.0) * 100.0);
    }
}
