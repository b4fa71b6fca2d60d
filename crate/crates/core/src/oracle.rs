//! Huber-loss regression objective and its stochastic subgradient oracle.
//!
//! The objective is the sum form
//! `F(theta) = sum_i L_delta(a' x_i + b - y_i) + lambda * ||theta||_1 + (sigma/2) * ||theta||_2^2`
//! with `theta = (a, b)` laid out parameters-then-intercept. Because the loss
//! is a sum (not a mean) over samples, the stochastic oracle scales the
//! per-sample subgradient by `N / batch` to stay unbiased.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::DataSet;
use crate::error::{Error, Result};
use crate::prox::L1Regularizer;
use crate::vecmath::norm_sq;

/// Huber loss: quadratic inside `[-delta, delta]`, linear outside. Continuous
/// and continuously differentiable at the boundary.
pub fn huber_value(z: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    if z.abs() <= delta {
        0.5 * z * z
    } else {
        delta * (z.abs() - 0.5 * delta)
    }
}

/// Derivative of the Huber loss: `z` inside the band, `delta * sign(z)`
/// outside. Both branches agree at `|z| = delta`; residuals exactly on the
/// boundary take the interior branch.
pub fn huber_subgradient(z: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    if z.abs() <= delta {
        z
    } else {
        delta * z.signum()
    }
}

/// One stochastic subgradient draw, with its squared Euclidean norm cached
/// for the second-moment accumulators.
#[derive(Debug, Clone)]
pub struct SubgradientSample {
    pub w: Vec<f64>,
    pub squared_dual_norm: f64,
}

impl SubgradientSample {
    pub fn new(w: Vec<f64>) -> Self {
        let squared_dual_norm = norm_sq(&w);
        SubgradientSample {
            w,
            squared_dual_norm,
        }
    }
}

/// An l1-regularized Huber regression instance over a fixed dataset.
///
/// The dataset is immutable and shared; concurrent trials each own their
/// random stream, so the problem itself is freely shareable across threads.
#[derive(Debug, Clone)]
pub struct HuberRegressionProblem {
    data: Arc<DataSet>,
    /// Huber influence boundary.
    pub delta: f64,
    /// l1 weight (the intercept is regularized too).
    pub lambda: f64,
    /// Optional quadratic weight making the regularizer strongly convex.
    pub sigma: f64,
    /// Samples per stochastic oracle call (default 1).
    pub batch: usize,
}

impl HuberRegressionProblem {
    pub fn new(data: Arc<DataSet>, delta: f64, lambda: f64, sigma: f64, batch: usize) -> Result<Self> {
        if data.n_samples() == 0 {
            return Err(Error::Config("dataset is empty".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {delta}")));
        }
        if batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        // Reuse the regularizer validation for lambda/sigma.
        L1Regularizer::new(lambda, sigma)?;
        Ok(HuberRegressionProblem {
            data,
            delta,
            lambda,
            sigma,
            batch,
        })
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn n_samples(&self) -> usize {
        self.data.n_samples()
    }

    /// Dimension of the parameter vector `(a, b)`: features plus intercept.
    pub fn param_dim(&self) -> usize {
        self.data.dim() + 1
    }

    pub fn regularizer(&self) -> L1Regularizer {
        L1Regularizer {
            lambda: self.lambda,
            sigma: self.sigma,
        }
    }

    fn check_shape(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::Shape {
                expected: self.param_dim(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn residual(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.data.dim();
        let row = self.data.input(i);
        let mut acc = theta[d] - self.data.target(i);
        for j in 0..d {
            acc += theta[j] * row[j];
        }
        acc
    }

    /// The loss part `sum_i L_delta(residual_i)` without the regularizer.
    pub fn loss_sum(&self, theta: &[f64]) -> Result<f64> {
        self.check_shape(theta)?;
        let mut acc = 0.0;
        for i in 0..self.n_samples() {
            acc += huber_value(self.residual(theta, i), self.delta);
        }
        Ok(acc)
    }

    /// Exact deterministic objective `F(theta)`. Used for traces and gap
    /// computation, never inside the solver's oracle path.
    pub fn full_objective(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.loss_sum(theta)? + self.regularizer().value(theta))
    }

    /// Exact gradient of the loss part. The Huber loss is continuously
    /// differentiable, so this is the unique (sub)gradient of the loss sum.
    pub fn full_subgradient(&self, theta: &[f64]) -> Result<SubgradientSample> {
        Ok(self.loss_and_subgradient(theta)?.1)
    }

    /// Loss value and exact gradient in a single pass over the data; the
    /// deterministic reference run calls this every iteration. Samples are
    /// accumulated in fixed-size chunks folded in index order, so the result
    /// is bit-identical whether the chunks run serially or in parallel.
    pub fn loss_and_subgradient(&self, theta: &[f64]) -> Result<(f64, SubgradientSample)> {
        self.check_shape(theta)?;
        const CHUNK: usize = 512;
        let d = self.data.dim();
        let n = self.n_samples();
        let ranges: Vec<(usize, usize)> = (0..n)
            .step_by(CHUNK)
            .map(|s| (s, (s + CHUNK).min(n)))
            .collect();
        let partials: Vec<(f64, Vec<f64>)> = if n >= 2 * CHUNK {
            use rayon::prelude::*;
            ranges
                .par_iter()
                .map(|&(s, e)| self.chunk_pass(theta, s, e))
                .collect()
        } else {
            ranges
                .iter()
                .map(|&(s, e)| self.chunk_pass(theta, s, e))
                .collect()
        };
        let mut value = 0.0;
        let mut w = vec![0.0; d + 1];
        for (v, g) in partials {
            value += v;
            for (acc, gj) in w.iter_mut().zip(&g) {
                *acc += gj;
            }
        }
        Ok((value, SubgradientSample::new(w)))
    }

    fn chunk_pass(&self, theta: &[f64], start: usize, end: usize) -> (f64, Vec<f64>) {
        let d = self.data.dim();
        let mut value = 0.0;
        let mut w = vec![0.0; d + 1];
        for i in start..end {
            let r = self.residual(theta, i);
            value += huber_value(r, self.delta);
            let slope = huber_subgradient(r, self.delta);
            let row = self.data.input(i);
            for j in 0..d {
                w[j] += slope * row[j];
            }
            w[d] += slope;
        }
        (value, w)
    }

    /// Draws `batch` sample indices uniformly with replacement and returns
    /// `(N / batch) * sum_i L'_delta(residual_i) * (x_i, 1)`, an unbiased
    /// estimate of the full loss gradient. Deterministic given the stream.
    pub fn sample_subgradient(
        &self,
        theta: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<SubgradientSample> {
        self.check_shape(theta)?;
        let n = self.n_samples();
        let d = self.data.dim();
        let mut w = vec![0.0; d + 1];
        for _ in 0..self.batch {
            let i = rng.random_range(0..n);
            let slope = huber_subgradient(self.residual(theta, i), self.delta);
            let row = self.data.input(i);
            for j in 0..d {
                w[j] += slope * row[j];
            }
            w[d] += slope;
        }
        let scale = n as f64 / self.batch as f64;
        for wj in &mut w {
            *wj *= scale;
        }
        Ok(SubgradientSample::new(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::DataSet;
    use rand::SeedableRng;

    fn toy(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Arc<DataSet> {
        Arc::new(DataSet::from_parts(inputs, targets).unwrap())
    }

    #[test]
    fn huber_values() {
        assert_eq!(huber_value(1.0, 2.0), 0.5);
        assert_eq!(huber_value(0.0, 2.0), 0.0);
        assert_eq!(huber_value(5.0, 2.0), 8.0);
        // continuity at the boundary
        assert!((huber_value(2.0, 2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn huber_slopes() {
        assert_eq!(huber_subgradient(1.0, 2.0), 1.0);
        assert_eq!(huber_subgradient(-3.0, 2.0), -2.0);
        assert_eq!(huber_subgradient(2.0, 2.0), 2.0);
    }

    #[test]
    fn boundary_smoothness() {
        // |L'(delta +- eps) - delta| <= eps, measured at the representable
        // points nearest the intended offsets.
        let delta = 1.0;
        for eps in [1e-9, 1e-8, 1e-7, 1e-6] {
            for z in [delta + eps, delta - eps] {
                assert!((huber_subgradient(z, delta) - delta).abs() <= (z - delta).abs());
            }
        }
    }

    #[test]
    fn objective_examples() {
        // Zero parameters: F = sum L(-y_i) + 0.
        let p = HuberRegressionProblem::new(
            toy(vec![vec![1.0], vec![2.0]], vec![1.0, -3.0]),
            2.0,
            0.1,
            0.0,
            1,
        )
        .unwrap();
        let want = huber_value(-1.0, 2.0) + huber_value(3.0, 2.0);
        assert_eq!(p.full_objective(&[0.0, 0.0]).unwrap(), want);

        // Single sample x = (1), y = 1, theta = (1, 0): residual 0, l1 norm 1.
        let p = HuberRegressionProblem::new(toy(vec![vec![1.0]], vec![1.0]), 2.0, 0.1, 0.0, 1).unwrap();
        assert!((p.full_objective(&[1.0, 0.0]).unwrap() - 0.1).abs() < 1e-15);

        // Single sample x = (0), y = 3, theta = 0: Huber tail branch, 2*(3-1).
        let p = HuberRegressionProblem::new(toy(vec![vec![0.0]], vec![3.0]), 2.0, 1.0, 0.0, 1).unwrap();
        assert_eq!(p.loss_sum(&[0.0, 0.0]).unwrap(), 4.0);

        assert!(matches!(
            p.full_objective(&[0.0]),
            Err(Error::Shape { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn sample_subgradient_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Zero residual makes the sample exactly zero.
        let p = HuberRegressionProblem::new(toy(vec![vec![1.0]], vec![0.0]), 2.0, 0.1, 0.0, 1).unwrap();
        let s = p.sample_subgradient(&[0.0, 0.0], &mut rng).unwrap();
        assert_eq!(s.w, vec![0.0, 0.0]);
        assert_eq!(s.squared_dual_norm, 0.0);

        // N = 1, residual 1 in the interior branch: w = (1, 1).
        let s = p.sample_subgradient(&[1.0, 0.0], &mut rng).unwrap();
        assert_eq!(s.w, vec![1.0, 1.0]);
    }

    #[test]
    fn sample_subgradient_is_unbiased() {
        // Monte-Carlo mean over 1e5 draws vs the exact full gradient,
        // componentwise within 3 standard errors.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut gen = ChaCha8Rng::seed_from_u64(99);
        let n = 10;
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| gen.random_range(-5.0..5.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..n).map(|_| gen.random_range(-4.0..4.0)).collect();
        let p = HuberRegressionProblem::new(toy(inputs, targets), 2.0, 0.1, 0.0, 1).unwrap();
        let theta = [0.3, -0.2, 0.5, 0.1];
        let exact = p.full_subgradient(&theta).unwrap().w;

        let draws = 100_000usize;
        let dim = theta.len();
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for _ in 0..draws {
            let s = p.sample_subgradient(&theta, &mut rng).unwrap();
            for j in 0..dim {
                mean[j] += s.w[j];
                m2[j] += s.w[j] * s.w[j];
            }
        }
        for j in 0..dim {
            mean[j] /= draws as f64;
            let var = (m2[j] / draws as f64 - mean[j] * mean[j]).max(0.0);
            let se = (var / draws as f64).sqrt();
            assert!(
                (mean[j] - exact[j]).abs() <= 3.0 * se + 1e-12,
                "component {j}: mean {} vs exact {} (se {se})",
                mean[j],
                exact[j]
            );
        }
    }

    #[test]
    fn batching_changes_scale_not_mean() {
        let mut gen = ChaCha8Rng::seed_from_u64(3);
        let inputs: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![gen.random_range(-5.0..5.0)])
            .collect();
        let targets: Vec<f64> = (0..20).map(|_| gen.random_range(-4.0..4.0)).collect();
        let data = toy(inputs, targets);
        let p1 = HuberRegressionProblem::new(data.clone(), 2.0, 0.1, 0.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = [0.5, -0.1];
        let exact = p1.full_subgradient(&theta).unwrap().w;
        let draws = 50_000;
        let mut mean = vec![0.0; 2];
        for _ in 0..draws {
            let s = p1.sample_subgradient(&theta, &mut rng).unwrap();
            for j in 0..2 {
                mean[j] += s.w[j] / draws as f64;
            }
        }
        for j in 0..2 {
            assert!((mean[j] - exact[j]).abs() < 0.05 * (1.0 + exact[j].abs()));
        }
    }

    #[test]
    fn loss_is_convex_along_segments() {
        let mut gen = ChaCha8Rng::seed_from_u64(5);
        let inputs: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..2).map(|_| gen.random_range(-5.0..5.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..30).map(|_| gen.random_range(-6.0..6.0)).collect();
        let p = HuberRegressionProblem::new(toy(inputs, targets), 2.0, 0.1, 0.0, 1).unwrap();
        for _ in 0..200 {
            let u: Vec<f64> = (0..3).map(|_| gen.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| gen.random_range(-3.0..3.0)).collect();
            let alpha: f64 = gen.random_range(0.0..1.0);
            let mix: Vec<f64> = u
                .iter()
                .zip(&v)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect();
            let lhs = p.loss_sum(&mix).unwrap();
            let rhs = alpha * p.loss_sum(&u).unwrap() + (1.0 - alpha) * p.loss_sum(&v).unwrap();
            assert!(lhs <= rhs + 1e-9);
        }
    }
}
