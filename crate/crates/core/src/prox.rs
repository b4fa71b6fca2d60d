//! Closed-form solvers for the regularized model subproblems, and the
//! conjugate-style auxiliary function built on top of them.
//!
//! The shipped regularizer is the elastic-net form
//! `g(x) = lambda * ||x||_1 + (sigma/2) * ||x||_2^2` and the prox function is
//! `Psi(x) = 0.5 * ||x||_2^2`, so every subproblem separates per coordinate
//! and soft thresholding gives the exact minimizer. The contract allows other
//! prox functions (see [`ProxFunction`]) but only the Euclidean pairing ships.

use crate::error::{Error, Result};
use crate::vecmath::{norm_l1, norm_sq};

/// A nonnegative, strongly convex auxiliary function used to regularize the
/// model subproblems. `beta` is its strong-convexity modulus and
/// `center_value` its value at the minimizer.
#[derive(Clone, Copy)]
pub struct ProxFunction {
    pub beta: f64,
    pub center_value: f64,
    pub value: fn(&[f64]) -> f64,
}

/// The shipped prox function `Psi(x) = 0.5 * ||x||_2^2` (1-strongly convex,
/// minimized at the origin with value 0).
pub fn half_squared_norm() -> ProxFunction {
    ProxFunction {
        beta: 1.0,
        center_value: 0.0,
        value: |x| 0.5 * norm_sq(x),
    }
}

/// Elastic-net regularizer `lambda * ||x||_1 + (sigma/2) * ||x||_2^2`.
/// Strongly convex exactly when `sigma > 0`.
#[derive(Debug, Clone, Copy)]
pub struct L1Regularizer {
    pub lambda: f64,
    pub sigma: f64,
}

impl L1Regularizer {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!(
                "l1 weight lambda must be positive, got {lambda}"
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::Config(format!(
                "quadratic weight sigma must be nonnegative, got {sigma}"
            )));
        }
        Ok(L1Regularizer { lambda, sigma })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.lambda * norm_l1(x) + 0.5 * self.sigma * norm_sq(x)
    }

    pub fn is_strongly_convex(&self) -> bool {
        self.sigma > 0.0
    }
}

/// Sign with `sign(0) = 0`. On the soft-threshold boundary the shrinkage
/// factor is zero anyway, so this convention makes the output exactly zero
/// there instead of depending on a branch.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Minimizer of `<s, x> + A * (lambda * ||x||_1 + (sigma/2) * ||x||^2) + (gamma/2) * ||x||^2`.
///
/// Componentwise: `sign(-s_j) * max(|s_j| - A * lambda, 0) / (gamma + A * sigma)`.
/// With `sigma = 0` this is plain soft thresholding of `-s/gamma` at level
/// `A * lambda / gamma`.
pub fn rqm_prox(s: &[f64], a_sum: f64, lambda: f64, sigma: f64, gamma: f64) -> Result<Vec<f64>> {
    let curv = gamma + a_sum * sigma;
    if !(curv > 0.0) {
        return Err(Error::Degenerate(format!(
            "gamma + A*sigma = {curv} must be positive"
        )));
    }
    let thresh = a_sum * lambda;
    Ok(s.iter()
        .map(|&sj| sign(-sj) * (sj.abs() - thresh).max(0.0) / curv)
        .collect())
}

/// Minimizer of `<w, x> + lambda * ||x||_1 + (gamma/2) * ||x - y||^2`.
///
/// Componentwise: `sign(y_j - w_j/gamma) * max(|y_j - w_j/gamma| - lambda/gamma, 0)`.
pub fn srsg_prox(w: &[f64], y: &[f64], lambda: f64, gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::Degenerate(format!("gamma = {gamma} must be positive")));
    }
    if w.len() != y.len() {
        return Err(Error::Shape {
            expected: y.len(),
            got: w.len(),
        });
    }
    let shift = lambda / gamma;
    Ok(w.iter()
        .zip(y)
        .map(|(&wj, &yj)| {
            let u = yj - wj / gamma;
            sign(u) * (u.abs() - shift).max(0.0)
        })
        .collect())
}

/// Value and maximizer of `phi(s) = max_x { <s, x> - A * g(x) - gamma * Psi(x) }`
/// for the shipped `g` and `Psi`.
///
/// The maximizer is `rqm_prox(-s, ...)` and the value has the closed form
/// `sum_j max(|s_j| - A * lambda, 0)^2 / (2 * (gamma + A * sigma))`. `phi` is
/// convex and differentiable with gradient equal to the maximizer, which is
/// `1/(gamma + A*sigma)`-Lipschitz.
pub fn phi_eval(
    s: &[f64],
    a_sum: f64,
    lambda: f64,
    sigma: f64,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    let curv = gamma + a_sum * sigma;
    if !(curv > 0.0) {
        return Err(Error::Degenerate(format!(
            "gamma + A*sigma = {curv} must be positive"
        )));
    }
    let thresh = a_sum * lambda;
    let mut value = 0.0;
    let maximizer = s
        .iter()
        .map(|&sj| {
            let shrunk = (sj.abs() - thresh).max(0.0);
            value += shrunk * shrunk / (2.0 * curv);
            sign(sj) * shrunk / curv
        })
        .collect();
    Ok((value, maximizer))
}

/// Max over coordinates of the difference between a central finite difference
/// of the `phi` value and the corresponding maximizer component. The exact
/// gradient of `phi` is the maximizer, so this is `O(h^2)` away from zero.
pub fn phi_gradient_check(
    s: &[f64],
    a_sum: f64,
    lambda: f64,
    sigma: f64,
    gamma: f64,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step h must be positive, got {h}")));
    }
    let (_, grad) = phi_eval(s, a_sum, lambda, sigma, gamma)?;
    let mut worst = 0.0f64;
    let mut probe = s.to_vec();
    for j in 0..s.len() {
        probe[j] = s[j] + h;
        let (up, _) = phi_eval(&probe, a_sum, lambda, sigma, gamma)?;
        probe[j] = s[j] - h;
        let (down, _) = phi_eval(&probe, a_sum, lambda, sigma, gamma)?;
        probe[j] = s[j];
        worst = worst.max(((up - down) / (2.0 * h) - grad[j]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::bruteforce;
    use crate::vecmath::dot;
    use proptest::prelude::*;

    #[test]
    fn rqm_prox_examples() {
        // Values cross-checked against per-coordinate golden-section search
        // (see bruteforce below).
        assert_eq!(
            rqm_prox(&[3.0, -0.5], 2.0, 1.0, 0.0, 2.0).unwrap(),
            vec![-0.5, 0.0]
        );
        assert_eq!(rqm_prox(&[0.0, 0.0], 5.0, 3.0, 1.0, 1.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(rqm_prox(&[3.0], 2.0, 1.0, 1.0, 2.0).unwrap(), vec![-0.25]);
        for (got, want) in rqm_prox(&[3.0, -0.5], 2.0, 1.0, 0.0, 2.0)
            .unwrap()
            .iter()
            .zip(bruteforce::rqm_prox_oracle(&[3.0, -0.5], 2.0, 1.0, 0.0, 2.0))
        {
            assert!((got - want).abs() <= 1e-6);
        }
        assert!(matches!(
            rqm_prox(&[1.0], 0.0, 1.0, 0.0, 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn srsg_prox_examples() {
        assert_eq!(srsg_prox(&[0.5], &[1.0], 1.0, 2.0).unwrap(), vec![0.25]);
        assert_eq!(srsg_prox(&[0.0], &[0.0], 1.0, 1.0).unwrap(), vec![0.0]);
        assert_eq!(srsg_prox(&[4.0], &[0.0], 1.0, 2.0).unwrap(), vec![-1.5]);
        for (got, want) in srsg_prox(&[0.5], &[1.0], 1.0, 2.0)
            .unwrap()
            .iter()
            .zip(bruteforce::srsg_prox_oracle(&[0.5], &[1.0], 1.0, 2.0))
        {
            assert!((got - want).abs() <= 1e-6);
        }
        assert!(srsg_prox(&[1.0], &[1.0], 1.0, 0.0).is_err());
        assert!(matches!(
            srsg_prox(&[1.0, 2.0], &[1.0], 1.0, 1.0),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn phi_examples() {
        let (v, x) = phi_eval(&[3.0], 2.0, 1.0, 0.0, 2.0).unwrap();
        assert_eq!(v, 0.25);
        assert_eq!(x, vec![0.5]);
        // The value must equal the inner objective evaluated at the maximizer.
        let inner = dot(&[3.0], &x) - 2.0 * 1.0 * norm_l1(&x) - 2.0 * 0.5 * norm_sq(&x);
        assert!((v - inner).abs() < 1e-15);

        let (v, x) = phi_eval(&[0.0], 1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!((v, x), (0.0, vec![0.0]));
        // |s| <= A*lambda shrinks to zero.
        let (v, x) = phi_eval(&[1.0], 2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!((v, x), (0.0, vec![0.0]));
    }

    #[test]
    fn phi_maximizer_is_prox_of_negated_input() {
        let s = [3.0, -0.5, 0.7];
        let (_, x) = phi_eval(&s, 2.0, 1.0, 0.5, 2.0).unwrap();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        assert_eq!(x, rqm_prox(&neg, 2.0, 1.0, 0.5, 2.0).unwrap());
    }

    #[test]
    fn phi_gradient_check_examples() {
        assert!(phi_gradient_check(&[3.0], 2.0, 1.0, 0.0, 2.0, 1e-4).unwrap() <= 1e-6);
        assert!(phi_gradient_check(&[0.0], 2.0, 1.0, 0.0, 2.0, 1e-4).unwrap() <= 1e-6);
        assert!(phi_gradient_check(&[10.0], 1.0, 1.0, 0.0, 1.0, 1e-4).unwrap() <= 1e-5);
        assert!(phi_gradient_check(&[1.0], 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn boundary_gives_exact_zero() {
        // |s| == A*lambda sits exactly on the threshold.
        let out = rqm_prox(&[2.0, -2.0], 2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        assert_eq!(sign(0.0), 0.0);
    }

    fn vec_strategy(n: usize, lim: f64) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-lim..lim, n)
    }

    proptest! {
        // With sigma = 0 the output must match the soft-thresholding formula
        // written as sgn(-s/gamma) * max(|-s/gamma| - A*lambda/gamma, 0)
        // up to roundoff from the different association.
        #[test]
        fn reduces_to_printed_formula_when_sigma_zero(
            s in vec_strategy(4, 10.0),
            a_sum in 0.0f64..10.0,
            lambda in 1e-3f64..10.0,
            gamma in 1e-3f64..10.0,
        ) {
            let ours = rqm_prox(&s, a_sum, lambda, 0.0, gamma).unwrap();
            for (j, &sj) in s.iter().enumerate() {
                let printed = sign(-sj / gamma) * ((-sj / gamma).abs() - a_sum * lambda / gamma).max(0.0);
                let scale = printed.abs().max(1.0);
                prop_assert!((ours[j] - printed).abs() <= 1e-12 * scale);
            }
        }

        // The maximizer map is 1/(gamma + A*sigma)-Lipschitz.
        #[test]
        fn phi_maximizer_is_lipschitz(
            s1 in vec_strategy(3, 10.0),
            s2 in vec_strategy(3, 10.0),
            a_sum in 0.0f64..10.0,
            lambda in 1e-3f64..10.0,
            sigma in 0.0f64..10.0,
            gamma in 1e-3f64..10.0,
        ) {
            let (_, x1) = phi_eval(&s1, a_sum, lambda, sigma, gamma).unwrap();
            let (_, x2) = phi_eval(&s2, a_sum, lambda, sigma, gamma).unwrap();
            let lhs = norm_sq(&x1.iter().zip(&x2).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt();
            let rhs = norm_sq(&s1.iter().zip(&s2).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt()
                / (gamma + a_sum * sigma);
            prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
        }

        // phi is convex along segments.
        #[test]
        fn phi_is_convex(
            s1 in vec_strategy(3, 10.0),
            s2 in vec_strategy(3, 10.0),
            alpha in 0.0f64..1.0,
            a_sum in 0.0f64..10.0,
            lambda in 1e-3f64..10.0,
            sigma in 0.0f64..10.0,
            gamma in 1e-3f64..10.0,
        ) {
            let mix: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
            let (v1, _) = phi_eval(&s1, a_sum, lambda, sigma, gamma).unwrap();
            let (v2, _) = phi_eval(&s2, a_sum, lambda, sigma, gamma).unwrap();
            let (vm, _) = phi_eval(&mix, a_sum, lambda, sigma, gamma).unwrap();
            prop_assert!(vm <= alpha * v1 + (1.0 - alpha) * v2 + 1e-10);
        }

        // phi dominates the inner objective at any feasible point.
        #[test]
        fn phi_dominates_inner_objective(
            s in vec_strategy(3, 10.0),
            x in vec_strategy(3, 10.0),
            a_sum in 0.0f64..10.0,
            lambda in 1e-3f64..10.0,
            sigma in 0.0f64..10.0,
            gamma in 1e-3f64..10.0,
        ) {
            let (v, _) = phi_eval(&s, a_sum, lambda, sigma, gamma).unwrap();
            let reg = L1Regularizer { lambda, sigma };
            let inner = dot(&s, &x) - a_sum * reg.value(&x) - gamma * 0.5 * norm_sq(&x);
            prop_assert!(v >= inner - 1e-9);
        }
    }
}
