//! Baseline teachers: GREEDY (one-step distance minimization) and STRAIGHT
//! (move along the segment to the target as far as possible), and the loop
//! that runs a teacher until the learner reaches the target.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::{exact_landing, ProblemSpec, TeachingInput, Trajectory};
use crate::subspace::build_basis;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TeacherKind {
    Greedy,
    Straight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherPolicy {
    pub kind: TeacherKind,
    /// Number of direction samples in the GREEDY sweep.
    pub grid_resolution: usize,
    /// Golden-section iterations used to polish each GREEDY grid minimum.
    pub polish_iterations: usize,
}

impl TeacherPolicy {
    pub fn greedy() -> Self {
        Self {
            kind: TeacherKind::Greedy,
            grid_resolution: 720,
            polish_iterations: 40,
        }
    }

    pub fn straight() -> Self {
        Self {
            kind: TeacherKind::Straight,
            ..Self::greedy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution < 8 {
            return Err(Error::InvalidParameter {
                name: "grid_resolution",
                reason: format!("must be at least 8, got {}", self.grid_resolution),
            });
        }
        Ok(())
    }

    /// Next input chosen by this policy at state `w`.
    pub fn choose(&self, w: &Vector, spec: &ProblemSpec) -> Result<TeachingInput> {
        match self.kind {
            TeacherKind::Straight => straight_step(w, spec),
            TeacherKind::Greedy => greedy_step_with(w, spec, self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ExactLanding,
    Tolerance,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachRunResult {
    pub trajectory: Trajectory,
    pub steps: usize,
    pub converged: bool,
    pub termination: Termination,
}

fn direction_to_target(w: &Vector, spec: &ProblemSpec) -> Result<(Vector, f64)> {
    check_dim(spec.dim(), w.len())?;
    let r = &spec.w_star - w;
    let dist = r.norm();
    if dist == 0.0 {
        return Err(Error::Precondition("learner is already at the target".into()));
    }
    Ok((r, dist))
}

/// STRAIGHT: `x = a (w* - w)/|w* - w|`, `y = ry`, with the closed-form `a`.
pub fn straight_step(w: &Vector, spec: &ProblemSpec) -> Result<TeachingInput> {
    let (r, dist) = direction_to_target(w, spec)?;
    let s = r.dot(w);
    let a = if s > 0.0 {
        spec.rx.min(spec.ry * dist / (2.0 * s))
    } else {
        spec.rx
    };
    Ok(TeachingInput {
        x: (a / dist) * r,
        y: spec.ry,
    })
}

/// GREEDY with the default sweep settings.
pub fn greedy_step(w: &Vector, spec: &ProblemSpec) -> Result<TeachingInput> {
    greedy_step_with(w, spec, &TeacherPolicy::greedy())
}

/// Planar GREEDY subproblem: `w`, `r = w* - w` in plane coordinates.
struct GreedyPlane {
    w: [f64; 2],
    r: [f64; 2],
    eta: f64,
    rx: f64,
    ry: f64,
}

impl GreedyPlane {
    /// Range of the signed displacement `eta a (ry - a c)` over `a` in `[0, rx]`.
    fn displacement_range(&self, c: f64) -> (f64, f64) {
        let at_rx = self.rx * (self.ry - self.rx * c);
        let hi = if c > 0.0 && self.ry / (2.0 * c) < self.rx {
            self.ry * self.ry / (4.0 * c)
        } else {
            at_rx
        };
        (self.eta * at_rx.min(0.0), self.eta * hi)
    }

    /// Best displacement along direction `theta` and the resulting squared distance.
    fn along(&self, theta: f64) -> (f64, f64) {
        let (s, co) = theta.sin_cos();
        let c = self.w[0] * co + self.w[1] * s;
        let q = self.r[0] * co + self.r[1] * s;
        let (lo, hi) = self.displacement_range(c);
        let g = q.clamp(lo, hi);
        let e0 = g * co - self.r[0];
        let e1 = g * s - self.r[1];
        (g, e0 * e0 + e1 * e1)
    }

    /// Input radius `a` in `[0, rx]` achieving displacement `g`.
    fn radius_for(&self, theta: f64, g: f64) -> f64 {
        let (s, co) = theta.sin_cos();
        let c = self.w[0] * co + self.w[1] * s;
        let k = g / self.eta;
        // c a^2 - ry a + k = 0
        let disc = (self.ry * self.ry - 4.0 * c * k).max(0.0);
        let a = if k >= 0.0 {
            2.0 * k / (self.ry + disc.sqrt())
        } else {
            (self.ry + disc.sqrt()) / (2.0 * c)
        };
        a.clamp(0.0, self.rx)
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// GREEDY: minimize `|step(w, x, ry) - w*|^2` over `|x| <= rx`.
///
/// The minimizer lies in `span{w, w*}`. In that plane the input is written
/// `x = a u(theta)`; for fixed `theta` the update moves along `u` by
/// `eta a (ry - a w.u)`, an interval of values containing 0, so the inner
/// problem is solved exactly by clamping the target projection to it. The
/// outer angle is swept on a grid and the best grid minima are polished.
pub fn greedy_step_with(w: &Vector, spec: &ProblemSpec, policy: &TeacherPolicy) -> Result<TeachingInput> {
    policy.validate()?;
    let (_, dist) = direction_to_target(w, spec)?;
    let n = w.len();
    if n < 2 {
        return Err(Error::Precondition("GREEDY needs dimension >= 2".into()));
    }
    let basis = build_basis(w, &spec.w_star)?;
    let wp = basis.project(w)?;
    let rp = basis.project(&(&spec.w_star - w))?;
    let (w2, r2) = ([wp[0], wp[1]], [rp[0], rp[1]]);
    let plane = GreedyPlane {
        w: w2,
        r: r2,
        eta: spec.eta,
        rx: spec.rx,
        ry: spec.ry,
    };

    let m = policy.grid_resolution;
    let h = std::f64::consts::TAU / m as f64;
    let values: Vec<f64> = (0..m).map(|k| plane.along(k as f64 * h).1).collect();
    let mut minima: Vec<usize> = (0..m)
        .filter(|&k| {
            let prev = values[(k + m - 1) % m];
            let next = values[(k + 1) % m];
            values[k] <= prev && values[k] <= next
        })
        .collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    minima.truncate(4);

    let mut best = (0.0, dist * dist);
    for &k in &minima {
        let centre = k as f64 * h;
        let (theta, val) = golden_section(|t| plane.along(t).1, centre - h, centre + h, policy.polish_iterations);
        let (theta, val) = if values[k] < val {
            (centre, values[k])
        } else {
            (theta, val)
        };
        if val < best.1 {
            best = (theta, val);
        }
    }
    if best.1 >= dist * dist {
        return Ok(TeachingInput::zero(n, spec.ry));
    }
    let theta = best.0;
    let g = plane.along(theta).0;
    let a = plane.radius_for(theta, g);
    let (s, c) = theta.sin_cos();
    let x = basis.lift(&Vector::from_column_slice(&[a * c, a * s]))?;
    Ok(TeachingInput { x, y: spec.ry })
}

/// Run `policy` from `spec.w0` until the target is reached or `max_steps` inputs are used.
///
/// Before every step an exact one-step landing is attempted; the run also stops
/// once `|w_t - w*| <= tol`.
pub fn run_teacher(policy: &TeacherPolicy, spec: &ProblemSpec, max_steps: usize, tol: f64) -> Result<TeachRunResult> {
    policy.validate()?;
    spec.validate()?;
    if max_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "max_steps",
            reason: "must be at least 1".into(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let mut traj = Trajectory::start(spec.w0.clone(), spec.eta, &spec.w_star);
    let termination = loop {
        if traj.terminal_residual <= tol {
            break Termination::Tolerance;
        }
        if traj.len() >= max_steps {
            break Termination::MaxSteps;
        }
        let w = traj.last_state().clone();
        if let Some(u) = exact_landing(&w, spec)? {
            traj.push(u, &spec.w_star)?;
            break Termination::ExactLanding;
        }
        let u = policy.choose(&w, spec)?;
        traj.push(u, &spec.w_star)?;
    };
    Ok(TeachRunResult {
        steps: traj.len(),
        converged: termination != Termination::MaxSteps,
        termination,
        trajectory: traj,
    })
}

/// Default termination tolerance for step counting.
pub fn default_tolerance(spec: &ProblemSpec) -> f64 {
    1e-3 * spec.ry
}
