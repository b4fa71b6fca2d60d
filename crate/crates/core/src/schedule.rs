//! Control-parameter sequences for the quasi-monotone iteration.
//!
//! A schedule produces the averaging weights `a_k` (with running sum `A_k`)
//! and the prox scaling `gamma_k`. Three closed-form kinds ship:
//!
//! * [`ScheduleKind::Sqrt`]: `a_k = 1`, `gamma_k = sqrt(k+1)`. The standard
//!   choice for a merely convex regularizer; it yields the `1/sqrt(k+1)`
//!   last-iterate rate.
//! * [`ScheduleKind::Log`]: `a_k = 1`, `gamma_k = ln(2k+3)`. Paired with a
//!   strongly convex regularizer it improves the rate to `ln(2k+3)/(k+1)`.
//! * [`ScheduleKind::Quadratic`]: `a_k = k` (so `A_k = k(k+1)/2`) with a
//!   constant `gamma`. An aggressive choice that works well in practice even
//!   though the worst-case analysis does not cover the constant `gamma`.
//!
//! `Custom` schedules come from explicit tables and are validated eagerly.
//!
//! Note that `a_0 = 0` is permitted (the quadratic kind uses it): the
//! initialization then minimizes `gamma_0 * Psi` alone and the index-0 term
//! drops out of every weighted sum.

use crate::error::{Error, Result};

/// Built-in schedule families plus user-supplied tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Unit weights, `gamma_k = sqrt(k+1)`.
    Sqrt,
    /// Unit weights, `gamma_k = ln(2k+3)`.
    Log,
    /// Linearly growing weights `a_k = k`, constant `gamma`.
    Quadratic,
    /// Explicit `a` and `gamma` tables.
    Custom,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    /// Accepts the CLI spellings `cor1`, `cor2`, `quadratic`, `custom`
    /// (plus `sqrt`/`log` aliases).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cor1" | "sqrt" => Ok(ScheduleKind::Sqrt),
            "cor2" | "log" => Ok(ScheduleKind::Log),
            "quadratic" => Ok(ScheduleKind::Quadratic),
            "custom" => Ok(ScheduleKind::Custom),
            other => Err(Error::Config(format!("unknown schedule kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
struct CustomTables {
    a: Vec<f64>,
    a_prefix: Vec<f64>,
    gamma: Vec<f64>,
}

/// Weight and prox-scaling sequences, together with the convexity moduli
/// needed to form the subproblem curvature `mu_k = A_k * sigma + gamma_k * beta`.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Strong-convexity modulus of the regularizer `g` (0 for plain l1).
    pub sigma: f64,
    /// Strong-convexity modulus of the prox function (1 for `0.5 * ||x||^2`).
    pub beta: f64,
    /// The constant `gamma` used by the quadratic-weights kind.
    pub gamma_const: f64,
    custom: Option<CustomTables>,
}

pub const DEFAULT_QUADRATIC_GAMMA: f64 = 10.0;

impl Schedule {
    pub fn sqrt(sigma: f64) -> Self {
        Schedule {
            kind: ScheduleKind::Sqrt,
            sigma,
            beta: 1.0,
            gamma_const: DEFAULT_QUADRATIC_GAMMA,
            custom: None,
        }
    }

    pub fn log(sigma: f64) -> Self {
        Schedule {
            kind: ScheduleKind::Log,
            ..Schedule::sqrt(sigma)
        }
    }

    pub fn quadratic(sigma: f64) -> Self {
        Schedule {
            kind: ScheduleKind::Quadratic,
            ..Schedule::sqrt(sigma)
        }
    }

    pub fn quadratic_with_gamma(sigma: f64, gamma_const: f64) -> Result<Self> {
        if !(gamma_const > 0.0) {
            return Err(Error::Config(format!(
                "constant gamma must be positive, got {gamma_const}"
            )));
        }
        Ok(Schedule {
            gamma_const,
            ..Schedule::quadratic(sigma)
        })
    }

    /// Builds a schedule from explicit tables. Validation is eager: `gamma`
    /// must be positive and nondecreasing, `a_k > 0` for `k >= 1` and
    /// `a_0 >= 0`, and both tables must have the same length.
    pub fn custom(a: Vec<f64>, gamma: Vec<f64>, sigma: f64) -> Result<Self> {
        if a.is_empty() || a.len() != gamma.len() {
            return Err(Error::Config(format!(
                "custom schedule tables must be non-empty and equal length (a: {}, gamma: {})",
                a.len(),
                gamma.len()
            )));
        }
        if !a[0].is_finite() || a[0] < 0.0 {
            return Err(Error::Config(format!("a_0 must be >= 0, got {}", a[0])));
        }
        for (k, &ak) in a.iter().enumerate().skip(1) {
            if !ak.is_finite() || ak <= 0.0 {
                return Err(Error::Config(format!("a_{k} must be positive, got {ak}")));
            }
        }
        for (k, &gk) in gamma.iter().enumerate() {
            if !gk.is_finite() || gk <= 0.0 {
                return Err(Error::Config(format!(
                    "gamma_{k} must be positive, got {gk}"
                )));
            }
            if k > 0 && gk < gamma[k - 1] {
                return Err(Error::Config(format!(
                    "gamma table must be nondecreasing: gamma_{k} = {gk} < gamma_{} = {}",
                    k - 1,
                    gamma[k - 1]
                )));
            }
        }
        let mut a_prefix = Vec::with_capacity(a.len());
        let mut sum = 0.0;
        for &ak in &a {
            sum += ak;
            a_prefix.push(sum);
        }
        Ok(Schedule {
            kind: ScheduleKind::Custom,
            sigma,
            beta: 1.0,
            gamma_const: DEFAULT_QUADRATIC_GAMMA,
            custom: Some(CustomTables { a, a_prefix, gamma }),
        })
    }

    /// Returns `(a_k, A_k)` where `A_k` is the exact running sum of the
    /// weights through index `k`. Closed forms are used for the built-in
    /// kinds (they are integer-valued and exact in double precision).
    pub fn weights(&self, k: usize) -> (f64, f64) {
        match self.kind {
            ScheduleKind::Sqrt | ScheduleKind::Log => (1.0, (k + 1) as f64),
            ScheduleKind::Quadratic => {
                let kf = k as f64;
                (kf, kf * (kf + 1.0) / 2.0)
            }
            ScheduleKind::Custom => {
                let t = self.custom.as_ref().expect("custom tables present");
                assert!(
                    k < t.a.len(),
                    "custom schedule table too short for index {k} (run horizon_check first)"
                );
                (t.a[k], t.a_prefix[k])
            }
        }
    }

    /// The prox scaling `gamma_k`, nondecreasing in `k` for every kind.
    pub fn gamma(&self, k: usize) -> f64 {
        match self.kind {
            ScheduleKind::Sqrt => ((k + 1) as f64).sqrt(),
            ScheduleKind::Log => ((2 * k + 3) as f64).ln(),
            ScheduleKind::Quadratic => self.gamma_const,
            ScheduleKind::Custom => {
                let t = self.custom.as_ref().expect("custom tables present");
                assert!(
                    k < t.gamma.len(),
                    "custom schedule table too short for index {k} (run horizon_check first)"
                );
                t.gamma[k]
            }
        }
    }

    /// Subproblem curvature at index `k`.
    pub fn mu(&self, k: usize) -> Result<f64> {
        let (_, a_sum) = self.weights(k);
        modulus_mu(a_sum, self.gamma(k), self.sigma, self.beta)
    }

    /// Checks that the schedule can supply indices `0..=iters`. Only custom
    /// tables can run out; the closed-form kinds are unbounded.
    pub fn horizon_check(&self, iters: usize) -> Result<()> {
        if let Some(t) = &self.custom {
            if t.a.len() <= iters {
                return Err(Error::Config(format!(
                    "custom schedule table has {} entries but {} iterations need index {}",
                    t.a.len(),
                    iters,
                    iters
                )));
            }
        }
        Ok(())
    }
}

/// Strong-convexity modulus `mu = A * sigma + gamma * beta` of the subproblem
/// objective. Errors when both products vanish, because the subproblem then
/// has no unique minimizer.
pub fn modulus_mu(a_sum: f64, gamma: f64, sigma: f64, beta: f64) -> Result<f64> {
    let mu = a_sum * sigma + gamma * beta;
    if a_sum * sigma > 0.0 || gamma * beta > 0.0 {
        Ok(mu)
    } else {
        Err(Error::Degenerate(format!(
            "A*sigma = {} and gamma*beta = {} are both nonpositive",
            a_sum * sigma,
            gamma * beta
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_closed_forms() {
        let s = Schedule::sqrt(0.0);
        assert_eq!(s.weights(0), (1.0, 1.0));
        let q = Schedule::quadratic(0.0);
        assert_eq!(q.weights(3), (3.0, 6.0));
        assert_eq!(q.weights(0), (0.0, 0.0));
    }

    #[test]
    fn gamma_closed_forms() {
        assert_eq!(Schedule::sqrt(0.0).gamma(3), 2.0);
        assert!((Schedule::log(0.0).gamma(0) - 3.0f64.ln()).abs() < 1e-15);
        assert_eq!(Schedule::sqrt(0.0).gamma(0), 1.0);
        assert_eq!(Schedule::quadratic(0.0).gamma(17), 10.0);
    }

    #[test]
    fn modulus_examples() {
        assert_eq!(modulus_mu(1.0, 1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(modulus_mu(4.0, 2.0, 0.5, 1.0).unwrap(), 4.0);
        assert_eq!(modulus_mu(0.0, 10.0, 1.0, 1.0).unwrap(), 10.0);
        assert!(matches!(
            modulus_mu(0.0, 0.0, 1.0, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn closed_form_weight_sums_are_exact() {
        // The built-in kinds have integer-valued weights, so the closed-form
        // A_k must equal the accumulated sum with zero error.
        for sched in [
            Schedule::sqrt(0.0),
            Schedule::log(0.0),
            Schedule::quadratic(0.0),
        ] {
            let mut acc = 0.0;
            for k in 0..=1_000_000usize {
                let (a, a_sum) = sched.weights(k);
                acc += a;
                assert_eq!(acc, a_sum, "kind {:?}, k = {k}", sched.kind);
            }
        }
    }

    #[test]
    fn gamma_is_nondecreasing() {
        for sched in [
            Schedule::sqrt(0.0),
            Schedule::log(0.0),
            Schedule::quadratic(0.0),
        ] {
            let mut prev = sched.gamma(0);
            assert!(prev > 0.0);
            for k in 1..=1_000_000usize {
                let g = sched.gamma(k);
                assert!(g >= prev, "kind {:?}, k = {k}", sched.kind);
                prev = g;
            }
        }
    }

    #[test]
    fn mu_is_nondecreasing() {
        for sched in [Schedule::sqrt(0.5), Schedule::log(0.5), Schedule::quadratic(0.5)] {
            let mut prev = sched.mu(0).unwrap();
            for k in 1..1000usize {
                let mu = sched.mu(k).unwrap();
                assert!(mu >= prev);
                prev = mu;
            }
        }
    }

    #[test]
    fn custom_validation() {
        // a_0 = 0 is allowed, later zeros are not.
        assert!(Schedule::custom(vec![0.0, 1.0], vec![1.0, 2.0], 0.0).is_ok());
        assert!(Schedule::custom(vec![1.0, 0.0], vec![1.0, 2.0], 0.0).is_err());
        // gamma must be nondecreasing and positive.
        assert!(Schedule::custom(vec![1.0, 1.0], vec![2.0, 1.0], 0.0).is_err());
        assert!(Schedule::custom(vec![1.0, 1.0], vec![0.0, 1.0], 0.0).is_err());
        // length mismatch
        assert!(Schedule::custom(vec![1.0], vec![1.0, 2.0], 0.0).is_err());

        let s = Schedule::custom(vec![0.5, 1.5, 2.0], vec![1.0, 1.0, 3.0], 0.0).unwrap();
        assert_eq!(s.weights(2), (2.0, 4.0));
        assert_eq!(s.gamma(2), 3.0);
        assert!(s.horizon_check(2).is_ok());
        assert!(s.horizon_check(3).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("cor1".parse::<ScheduleKind>().unwrap(), ScheduleKind::Sqrt);
        assert_eq!("cor2".parse::<ScheduleKind>().unwrap(), ScheduleKind::Log);
        assert_eq!(
            "quadratic".parse::<ScheduleKind>().unwrap(),
            ScheduleKind::Quadratic
        );
        assert!("nope".parse::<ScheduleKind>().is_err());
    }
}
