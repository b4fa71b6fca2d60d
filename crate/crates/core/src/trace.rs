//! Per-trial iteration records and their CSV form.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::vecmath::norm_sq;

/// A reference point (usually a certified near-minimizer) against which gaps
/// and bounds are reported.
#[derive(Debug, Clone)]
pub struct Reference {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl Reference {
    /// `Psi(x_ref)` for the shipped prox function.
    pub fn psi(&self) -> f64 {
        0.5 * norm_sq(&self.x)
    }
}

/// Recording options for solver runs.
#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Record every `stride`-th iteration (the initial and final iterates are
    /// always recorded).
    pub stride: usize,
    /// When present, traces carry the optimality gap and the running
    /// last-iterate bound relative to this point.
    pub reference: Option<Reference>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            stride: 10,
            reference: None,
        }
    }
}

impl TraceOptions {
    pub fn records(&self, k: usize) -> bool {
        self.stride <= 1 || k % self.stride == 0
    }
}

/// One recorded iteration. `gap` and `bound` are NaN when the run had no
/// reference point; `bound` and `b_hat` are NaN for methods without a
/// second-moment accumulator.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub gap: f64,
    pub bound: f64,
    pub b_hat: f64,
    pub gamma_over_a: f64,
    pub wall_ns: u128,
}

/// The record of one trial. On a numerical failure the trace is partial and
/// `failure` carries the error text.
#[derive(Debug, Clone)]
pub struct Trace {
    pub trial: u64,
    pub method: String,
    pub points: Vec<TracePoint>,
    /// Running max of squared subgradient norms seen by the oracle.
    pub g2_max: f64,
    /// Mean of squared subgradient norms over the run.
    pub g2_mean: f64,
    pub failure: Option<String>,
}

impl Trace {
    pub fn final_objective(&self) -> Option<f64> {
        self.points.last().map(|p| p.objective)
    }

    /// Objective at the recorded iteration closest to `iter` from below.
    pub fn objective_at(&self, iter: usize) -> Option<f64> {
        self.points
            .iter()
            .take_while(|p| p.iter <= iter)
            .last()
            .map(|p| p.objective)
    }
}

/// Writes traces in long format, one row per recorded iteration:
/// `trial,iter,objective,gap,bound,b_hat,gamma_over_a,wall_ns`.
pub fn write_trace_csv(path: &Path, traces: &[Trace]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "trial,iter,objective,gap,bound,b_hat,gamma_over_a,wall_ns")?;
    for t in traces {
        for p in &t.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t.trial, p.iter, p.objective, p.gap, p.bound, p.b_hat, p.gamma_over_a, p.wall_ns
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_always_records_zero() {
        let opts = TraceOptions {
            stride: 7,
            reference: None,
        };
        assert!(opts.records(0));
        assert!(opts.records(14));
        assert!(!opts.records(15));
    }

    #[test]
    fn csv_format_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let trace = Trace {
            trial: 3,
            method: "rqm".into(),
            points: vec![TracePoint {
                iter: 0,
                objective: 1.5,
                gap: f64::NAN,
                bound: f64::INFINITY,
                b_hat: 0.25,
                gamma_over_a: 1.0,
                wall_ns: 10,
            }],
            g2_max: 0.0,
            g2_mean: 0.0,
            failure: None,
        };
        write_trace_csv(&path, &[trace]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "trial,iter,objective,gap,bound,b_hat,gamma_over_a,wall_ns\n3,0,1.5,NaN,inf,0.25,1,10\n"
        );
    }
}
