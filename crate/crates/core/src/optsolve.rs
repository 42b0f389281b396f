//! Small first-order constrained solvers.
//!
//! [`minimize_projected`] is an accelerated projected-gradient method
//! (FISTA with backtracking and function-value restarts); accepted iterates
//! never increase the objective. [`augmented_lagrangian`] wraps it to handle
//! equality constraints, leaving simple set constraints to the projector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    FixedStep,
    BacktrackingLineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub grad_tol: f64,
    pub constraint_tol: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub step_rule: StepRule,
    /// Initial (or fixed) gradient step length.
    pub initial_step: f64,
    /// Stop the inner solve as soon as the objective drops to this value.
    pub target_objective: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer: 50,
            max_inner: 5000,
            grad_tol: 1e-9,
            constraint_tol: 1e-8,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            step_rule: StepRule::BacktrackingLineSearch,
            initial_step: 1.0,
            target_objective: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.max_outer == 0 {
            return bad("max_outer", "must be positive");
        }
        if self.max_inner == 0 {
            return bad("max_inner", "must be positive");
        }
        if !(self.grad_tol > 0.0) || !(self.constraint_tol > 0.0) {
            return bad("tolerances", "must be positive");
        }
        if !(self.penalty_init > 0.0) {
            return bad("penalty_init", "must be positive");
        }
        if !(self.penalty_growth > 1.0) {
            return bad("penalty_growth", "must exceed 1");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Stationary,
    TargetReached,
    IterationLimit,
    PenaltyLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub point: Vector,
    pub objective: f64,
    pub constraint_violation: f64,
    pub converged: bool,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Euclidean projection onto the ball of radius `r` about the origin.
pub fn project_ball(x: &Vector, r: f64) -> Vector {
    let n = x.norm();
    if n <= r {
        x.clone()
    } else {
        (r / n) * x
    }
}

/// In-place variant of [`project_ball`] on a slice.
pub fn project_ball_slice(x: &mut [f64], r: f64) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > r {
        let s = r / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Objective changes below `NOISE * rounding(f)` are treated as rounding error.
const NOISE: f64 = 1e3;

fn rounding(f: f64) -> f64 {
    16.0 * f64::EPSILON * f.abs().max(f64::MIN_POSITIVE)
}

/// Upper-model test for backtracking. Near a minimizer the function-value
/// form drowns in rounding error, so fall back to the gradient form there.
fn sufficient_decrease(fy: f64, gy: &Vector, fz: f64, gz: &Vector, d: &Vector, lipschitz: f64) -> bool {
    let dd = d.norm_squared();
    let model = gy.dot(d) + 0.5 * lipschitz * dd;
    if (fz - fy).abs() > NOISE * rounding(fy) {
        fz - fy <= model
    } else {
        (gz - gy).dot(d) <= lipschitz * dd
    }
}

fn finite(f: f64, g: &Vector) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

/// Minimize a smooth function over the set described by `project`.
///
/// `objective` returns the value and gradient. Terminates when
/// `|x - P(x - g(x))| <= grad_tol`, when the optional target objective is
/// reached, or after `max_inner` iterations.
pub fn minimize_projected<F, P>(mut objective: F, project: P, x0: &Vector, opts: &SolverOptions) -> Result<SolveOutcome>
where
    F: FnMut(&Vector) -> (f64, Vector),
    P: Fn(&mut Vector),
{
    opts.validate()?;
    let mut x = x0.clone();
    project(&mut x);
    let (mut fx, mut gx) = objective(&x);
    if !finite(fx, &gx) {
        return Err(Error::NonFinite {
            iteration: 0,
            what: format!("objective {fx} at the starting point"),
        });
    }
    let mut y = x.clone();
    let (mut fy, mut gy) = (fx, gx.clone());
    let mut momentum: f64 = 1.0;
    let mut lipschitz = 1.0 / opts.initial_step;
    let backtrack = opts.step_rule == StepRule::BacktrackingLineSearch;

    let outcome = |point: Vector, objective: f64, iterations: usize, stop: StopReason| SolveOutcome {
        point,
        objective,
        constraint_violation: 0.0,
        converged: stop == StopReason::Stationary,
        iterations,
        stop,
    };

    for k in 0..opts.max_inner {
        let mut probe = &x - &gx;
        project(&mut probe);
        if (&x - &probe).norm() <= opts.grad_tol {
            return Ok(outcome(x, fx, k, StopReason::Stationary));
        }
        if opts.target_objective.is_some_and(|t| fx <= t) {
            return Ok(outcome(x, fx, k, StopReason::TargetReached));
        }

        let (z, fz, gz) = loop {
            let mut z = &y - &gy / lipschitz;
            project(&mut z);
            let (fz, gz) = objective(&z);
            let ok = finite(fz, &gz);
            if !ok && !backtrack {
                return Err(Error::NonFinite {
                    iteration: k,
                    what: format!("objective {fz} at trial point"),
                });
            }
            if !backtrack {
                break (z, fz, gz);
            }
            let d = &z - &y;
            if ok && sufficient_decrease(fy, &gy, fz, &gz, &d, lipschitz) {
                break (z, fz, gz);
            }
            lipschitz *= 2.0;
            if !lipschitz.is_finite() || lipschitz > 1e300 {
                return Err(Error::NonFinite {
                    iteration: k,
                    what: "line search step underflowed".into(),
                });
            }
        };

        if fz > fx + NOISE * rounding(fx) {
            if y != x {
                // Momentum overshot: restart from the last accepted point.
                y = x.clone();
                fy = fx;
                gy = gx.clone();
                momentum = 1.0;
            } else {
                lipschitz *= 2.0;
            }
            continue;
        }

        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        y = &z + beta * (&z - &x);
        x = z;
        fx = fz;
        gx = gz;
        momentum = next_momentum;
        if beta == 0.0 {
            fy = fx;
            gy = gx.clone();
        } else {
            let (f, g) = objective(&y);
            if finite(f, &g) {
                fy = f;
                gy = g;
            } else {
                y = x.clone();
                fy = fx;
                gy = gx.clone();
                momentum = 1.0;
            }
        }
        if backtrack {
            lipschitz *= 0.9;
        }
    }
    Ok(outcome(x, fx, opts.max_inner, StopReason::IterationLimit))
}

/// Equality constraints `c(x) = 0` with their vector-Jacobian product.
pub trait EqualityConstraints {
    fn values(&self, x: &Vector) -> Vector;
    /// `J(x)^T weights`.
    fn vjp(&self, x: &Vector, weights: &Vector) -> Vector;
}

impl<V, J> EqualityConstraints for (V, J)
where
    V: Fn(&Vector) -> Vector,
    J: Fn(&Vector, &Vector) -> Vector,
{
    fn values(&self, x: &Vector) -> Vector {
        (self.0)(x)
    }
    fn vjp(&self, x: &Vector, weights: &Vector) -> Vector {
        (self.1)(x, weights)
    }
}

const PENALTY_LIMIT: f64 = 1e12;

/// Augmented-Lagrangian method for `min f(x)` s.t. `c(x) = 0`, `x` in the projector's set.
pub fn augmented_lagrangian<F, C, P>(
    mut objective: F,
    constraints: &C,
    project: P,
    x0: &Vector,
    opts: &SolverOptions,
) -> Result<SolveOutcome>
where
    F: FnMut(&Vector) -> (f64, Vector),
    C: EqualityConstraints + ?Sized,
    P: Fn(&mut Vector),
{
    opts.validate()?;
    let mut x = x0.clone();
    project(&mut x);
    let mut multipliers = Vector::zeros(constraints.values(&x).len());
    let mut penalty = opts.penalty_init;
    let mut previous = f64::INFINITY;
    let mut iterations = 0;
    let inner_opts = SolverOptions {
        target_objective: None,
        ..opts.clone()
    };

    for _ in 0..opts.max_outer {
        let inner = minimize_projected(
            |z: &Vector| {
                let (f, g) = objective(z);
                let c = constraints.values(z);
                let weights = &multipliers + penalty * &c;
                let value = f + multipliers.dot(&c) + 0.5 * penalty * c.norm_squared();
                (value, g + constraints.vjp(z, &weights))
            },
            &project,
            &x,
            &inner_opts,
        )?;
        iterations += inner.iterations;
        x = inner.point;
        let c = constraints.values(&x);
        let violation = c.norm();
        if violation <= opts.constraint_tol && inner.converged {
            let (f, _) = objective(&x);
            return Ok(SolveOutcome {
                point: x,
                objective: f,
                constraint_violation: violation,
                converged: true,
                iterations,
                stop: StopReason::Stationary,
            });
        }
        multipliers += penalty * &c;
        if violation > opts.constraint_tol && violation > 0.25 * previous {
            penalty *= opts.penalty_growth;
            if penalty > PENALTY_LIMIT {
                let (f, _) = objective(&x);
                return Ok(SolveOutcome {
                    point: x,
                    objective: f,
                    constraint_violation: violation,
                    converged: false,
                    iterations,
                    stop: StopReason::PenaltyLimit,
                });
            }
        }
        previous = violation;
    }
    let (f, _) = objective(&x);
    let violation = constraints.values(&x).norm();
    Ok(SolveOutcome {
        point: x,
        objective: f,
        constraint_violation: violation,
        converged: false,
        iterations,
        stop: StopReason::IterationLimit,
    })
}
