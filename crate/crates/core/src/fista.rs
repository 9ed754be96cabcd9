//! Accelerated proximal gradient (FISTA) with backtracking.
//!
//! The composite objective is `F(x) = f(x) + P(x)` with smooth `f`. Each
//! step searches `L = 2^s L_prev` until the quadratic upper model
//! `f(y) + ⟨x⁺ − y, ∇f(y)⟩ + (L/2)‖x⁺ − y‖²` dominates `f(x⁺)`.
//!
//! The iteration is monotone: when the momentum point yields a candidate
//! with larger `F` than the current iterate, the step is redone from the
//! current iterate (a plain proximal-gradient step) and momentum restarts.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A smooth-plus-nonsmooth problem driven by [`minimize`].
pub trait CompositeProblem {
    fn smooth_value(&self, x: &DVector<f64>) -> f64;

    fn smooth_value_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>);

    fn penalty(&self, x: &DVector<f64>) -> f64;

    /// Proximal map of `step · P` evaluated at `v`.
    fn prox(&self, v: &DVector<f64>, step: f64) -> Result<DVector<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FistaOptions {
    pub initial_lipschitz: f64,
    pub max_iter: usize,
    /// Stop once `‖x_t − x_{t−1}‖∞ ≤ tol`.
    pub tol: f64,
    pub max_backtracks: usize,
}

impl Default for FistaOptions {
    fn default() -> Self {
        Self {
            initial_lipschitz: 1.0,
            max_iter: 500,
            tol: 1e-6,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FistaResult {
    pub x: DVector<f64>,
    /// Composite objective at `x`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step-size constant in force at exit.
    pub lipschitz: f64,
}

struct Step {
    x: DVector<f64>,
    smooth: f64,
    composite: f64,
}

fn backtrack<P: CompositeProblem + ?Sized>(
    problem: &P,
    y: &DVector<f64>,
    lipschitz: &mut f64,
    opts: &FistaOptions,
    iteration: usize,
) -> Result<Step> {
    let (f_y, grad) = problem.smooth_value_and_grad(y);
    if !f_y.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective { iteration });
    }
    for _ in 0..=opts.max_backtracks {
        let step = 1.0 / *lipschitz;
        let candidate = problem.prox(&(y - &grad * step), step)?;
        let f_c = problem.smooth_value(&candidate);
        let diff = &candidate - y;
        let model = f_y + diff.dot(&grad) + 0.5 * *lipschitz * diff.norm_squared();
        if f_c.is_finite() && f_c <= model {
            let composite = f_c + problem.penalty(&candidate);
            return Ok(Step {
                x: candidate,
                smooth: f_c,
                composite,
            });
        }
        *lipschitz *= 2.0;
    }
    Err(Error::BacktrackingExhausted(opts.max_backtracks))
}

/// Runs monotone FISTA from `x0`. The composite objective at the returned
/// point never exceeds its value at `x0`.
pub fn minimize<P: CompositeProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    opts: &FistaOptions,
) -> Result<FistaResult> {
    if !(opts.initial_lipschitz.is_finite() && opts.initial_lipschitz > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "initial step constant must be positive, got {}",
            opts.initial_lipschitz
        )));
    }
    let mut lipschitz = opts.initial_lipschitz;
    let start = problem.smooth_value(&x0) + problem.penalty(&x0);
    if !start.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }

    let mut x = x0.clone();
    let mut x_prev = x0;
    let mut current = start;
    let mut t = 1.0_f64;
    let mut t_prev = 1.0_f64;
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 1..=opts.max_iter {
        iterations = iteration;
        let momentum = (t_prev - 1.0) / t;
        let accelerated = momentum != 0.0 && x != x_prev;
        let y = if accelerated {
            &x + (&x - &x_prev) * momentum
        } else {
            x.clone()
        };

        let mut step = backtrack(problem, &y, &mut lipschitz, opts, iteration)?;
        if step.composite > current && accelerated {
            step = backtrack(problem, &x, &mut lipschitz, opts, iteration)?;
            t = 1.0;
        }
        debug_assert!(step.smooth.is_finite());
        if !(step.composite <= current) {
            // a plain step from x can only lose to x by rounding
            converged = true;
            break;
        }

        let change = (&step.x - &x).amax();
        x_prev = std::mem::replace(&mut x, step.x);
        current = step.composite;

        t_prev = t;
        t = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());

        if change <= opts.tol {
            converged = true;
            break;
        }
    }

    Ok(FistaResult {
        x,
        objective: current,
        iterations,
        converged,
        lipschitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::soft_threshold;
    use approx::assert_abs_diff_eq;

    struct Quadratic {
        center: f64,
        l1: f64,
    }

    impl CompositeProblem for Quadratic {
        fn smooth_value(&self, x: &DVector<f64>) -> f64 {
            0.5 * (x[0] - self.center).powi(2)
        }
        fn smooth_value_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
            (
                self.smooth_value(x),
                DVector::from_element(1, x[0] - self.center),
            )
        }
        fn penalty(&self, x: &DVector<f64>) -> f64 {
            self.l1 * x[0].abs()
        }
        fn prox(&self, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
            Ok(soft_threshold(v, self.l1 * step))
        }
    }

    #[test]
    fn unconstrained_quadratic() {
        let p = Quadratic { center: 3.0, l1: 0.0 };
        let res = minimize(&p, DVector::zeros(1), &FistaOptions::default()).unwrap();
        assert!(res.converged);
        assert_abs_diff_eq!(res.x[0], 3.0, epsilon = 1e-6);
    }

    #[test]
    fn one_dimensional_lasso() {
        let p = Quadratic { center: 2.0, l1: 1.0 };
        let res = minimize(&p, DVector::zeros(1), &FistaOptions::default()).unwrap();
        assert_abs_diff_eq!(res.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(res.objective, 0.5 + 1.0, epsilon = 1e-10);
    }

    #[test]
    fn steep_problem_backtracks() {
        struct Steep;
        impl CompositeProblem for Steep {
            fn smooth_value(&self, x: &DVector<f64>) -> f64 {
                500.0 * (x[0] - 1.0).powi(2)
            }
            fn smooth_value_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
                (self.smooth_value(x), DVector::from_element(1, 1000.0 * (x[0] - 1.0)))
            }
            fn penalty(&self, _: &DVector<f64>) -> f64 {
                0.0
            }
            fn prox(&self, v: &DVector<f64>, _: f64) -> Result<DVector<f64>> {
                Ok(v.clone())
            }
        }
        let res = minimize(&Steep, DVector::zeros(1), &FistaOptions::default()).unwrap();
        assert!(res.lipschitz >= 1000.0);
        assert_abs_diff_eq!(res.x[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        struct Bad;
        impl CompositeProblem for Bad {
            fn smooth_value(&self, _: &DVector<f64>) -> f64 {
                f64::NAN
            }
            fn smooth_value_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
                (f64::NAN, x.clone())
            }
            fn penalty(&self, _: &DVector<f64>) -> f64 {
                0.0
            }
            fn prox(&self, v: &DVector<f64>, _: f64) -> Result<DVector<f64>> {
                Ok(v.clone())
            }
        }
        assert!(matches!(
            minimize(&Bad, DVector::zeros(2), &FistaOptions::default()),
            Err(Error::NonFiniteObjective { .. })
        ));
    }

    #[test]
    fn rejects_nonpositive_step_constant() {
        let p = Quadratic { center: 1.0, l1: 0.0 };
        let opts = FistaOptions {
            initial_lipschitz: 0.0,
            ..Default::default()
        };
        assert!(minimize(&p, DVector::zeros(1), &opts).is_err());
    }
}
