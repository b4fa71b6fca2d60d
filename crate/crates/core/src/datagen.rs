//! Synthetic sparse-regression data.
//!
//! The generation procedure: pick `nnz` support coordinates of the true
//! coefficient vector, sample their values and the intercept, draw inputs
//! uniformly from `[-5, 5]^dim`, then emit targets `a' x + b + eps` where
//! `eps` is standard normal with probability `1 - outlier_prob` and has an
//! inflated standard deviation otherwise.
//!
//! All randomness comes from a ChaCha8 stream seeded with the dataset seed,
//! so regeneration with the same seed is bit-for-bit reproducible. The stream
//! algorithm and every generation parameter are recorded in a JSON sidecar
//! next to the CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generation parameters. Defaults follow the benchmark configuration:
/// 10000 samples, 10 features with 4 nonzero, 5% outliers with a 5x noise
/// standard deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub dim: usize,
    pub nnz: usize,
    pub outlier_prob: f64,
    pub noise_std_main: f64,
    pub noise_std_outlier: f64,
}

impl GenConfig {
    pub fn new(seed: u64, n_samples: usize, dim: usize, nnz: usize) -> Self {
        GenConfig {
            seed,
            n_samples,
            dim,
            nnz,
            ..GenConfig::default()
        }
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 42,
            n_samples: 10_000,
            dim: 10,
            nnz: 4,
            outlier_prob: 0.05,
            noise_std_main: 1.0,
            noise_std_outlier: 5.0,
        }
    }
}

/// Ground truth and provenance, stored in the sidecar. Absent when a CSV is
/// loaded without its sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_coeffs: Vec<f64>,
    pub true_intercept: f64,
    /// How many targets actually drew the outlier noise component.
    pub outlier_count: usize,
    pub config: GenConfig,
    /// Name of the random stream algorithm used for generation.
    pub rng: String,
}

/// A regression dataset: `n` input rows of `dim` features plus targets.
#[derive(Debug, Clone)]
pub struct DataSet {
    inputs: Vec<f64>, // row-major, n * dim
    targets: Vec<f64>,
    dim: usize,
    pub ground_truth: Option<GroundTruth>,
}

impl DataSet {
    pub fn from_parts(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::Config(format!(
                "{} input rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut inputs = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Config(format!(
                    "row {i} has {} columns, expected {dim}",
                    row.len()
                )));
            }
            inputs.extend_from_slice(row);
        }
        Ok(DataSet {
            inputs,
            targets,
            dim,
            ground_truth: None,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// The true parameter vector `(a, b)` when ground truth is known.
    pub fn true_theta(&self) -> Option<Vec<f64>> {
        self.ground_truth.as_ref().map(|gt| {
            let mut theta = gt.true_coeffs.clone();
            theta.push(gt.true_intercept);
            theta
        })
    }
}

/// Draws a coefficient magnitude from `[0.5, 2]` with a random sign, keeping
/// the signal bounded away from zero so sparsity recovery is meaningful.
fn sample_signal(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(0.5..2.0);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Generates a dataset. Deterministic given `cfg.seed`; the draw order is
/// fixed (support, coefficients, intercept, then per sample: inputs, outlier
/// flag, noise).
pub fn generate(cfg: &GenConfig) -> Result<DataSet> {
    if cfg.nnz > cfg.dim {
        return Err(Error::Config(format!(
            "nnz = {} exceeds dim = {}",
            cfg.nnz, cfg.dim
        )));
    }
    if cfg.n_samples == 0 || cfg.dim == 0 {
        return Err(Error::Config("n_samples and dim must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.outlier_prob) {
        return Err(Error::Config(format!(
            "outlier_prob must lie in [0, 1], got {}",
            cfg.outlier_prob
        )));
    }
    if !(cfg.noise_std_main > 0.0) || !(cfg.noise_std_outlier > 0.0) {
        return Err(Error::Config("noise standard deviations must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, cfg.dim, cfg.nnz).into_vec();
    support.sort_unstable();
    let mut coeffs = vec![0.0; cfg.dim];
    for &j in &support {
        coeffs[j] = sample_signal(&mut rng);
    }
    let intercept = sample_signal(&mut rng);

    let main = Normal::new(0.0, cfg.noise_std_main).expect("validated std");
    let outlier = Normal::new(0.0, cfg.noise_std_outlier).expect("validated std");

    let mut inputs = Vec::with_capacity(cfg.n_samples * cfg.dim);
    let mut targets = Vec::with_capacity(cfg.n_samples);
    let mut outlier_count = 0;
    for _ in 0..cfg.n_samples {
        let mut mean = intercept;
        for j in 0..cfg.dim {
            let x = rng.random_range(-5.0..5.0);
            mean += coeffs[j] * x;
            inputs.push(x);
        }
        let eps = if rng.random_bool(cfg.outlier_prob) {
            outlier_count += 1;
            outlier.sample(&mut rng)
        } else {
            main.sample(&mut rng)
        };
        targets.push(mean + eps);
    }

    Ok(DataSet {
        inputs,
        targets,
        dim: cfg.dim,
        ground_truth: Some(GroundTruth {
            true_coeffs: coeffs,
            true_intercept: intercept,
            outlier_count,
            config: cfg.clone(),
            rng: "ChaCha8".into(),
        }),
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta.json");
    PathBuf::from(os)
}

/// Writes the dataset as `x_1,...,x_d,y` CSV rows (shortest round-trip float
/// formatting, so reading back reproduces every value exactly) plus a JSON
/// sidecar `<path>.meta.json` with ground truth and generation parameters.
pub fn write_csv(dataset: &DataSet, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for j in 0..dataset.dim() {
        write!(out, "x_{},", j + 1)?;
    }
    writeln!(out, "y")?;
    for i in 0..dataset.n_samples() {
        for x in dataset.input(i) {
            write!(out, "{x},")?;
        }
        writeln!(out, "{}", dataset.target(i))?;
    }
    out.flush()?;

    if let Some(gt) = &dataset.ground_truth {
        let json = serde_json::to_string_pretty(gt)
            .map_err(|e| Error::Config(format!("sidecar serialization failed: {e}")))?;
        fs::write(sidecar_path(path), json)?;
    }
    Ok(())
}

/// Reads a dataset written by [`write_csv`]. A missing sidecar is not an
/// error; the dataset then loads with unknown ground truth.
pub fn read_csv(path: &Path) -> Result<DataSet> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: display.clone(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols.last() != Some(&"y") {
        return Err(Error::Parse {
            path: display,
            line: 1,
            msg: format!("expected header x_1,...,x_d,y, got `{header}`"),
        });
    }
    let dim = cols.len() - 1;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                path: display,
                line: lineno,
                msg: format!("expected {} columns, got {}", dim + 1, fields.len()),
            });
        }
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: lineno,
                msg: format!("column {} is not a number: `{field}`", c + 1),
            })?;
            if c < dim {
                inputs.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::Parse {
            path: display,
            line: 1,
            msg: "no data rows".into(),
        });
    }

    let ground_truth = match fs::read_to_string(sidecar_path(path)) {
        Ok(json) => Some(
            serde_json::from_str(&json)
                .map_err(|e| Error::Config(format!("malformed sidecar: {e}")))?,
        ),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };

    Ok(DataSet {
        inputs,
        targets,
        dim,
        ground_truth,
    })
}
