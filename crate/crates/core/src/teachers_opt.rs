//! Optimal teachers.
//!
//! NLP: the fewest discrete steps `T`. For fixed `T`, feasibility is decided by
//! minimizing `|w_T - w*|^2` over the inputs (states eliminated by rollout,
//! each input projected onto the ball); `T` is then binary-searched, using
//! that feasibility is monotone since zero inputs leave the learner in place.
//!
//! CNLP: the shortest continuous time `t_f`, transcribed with trapezoidal
//! collocation on a uniform mesh of normalized time and solved by the
//! augmented-Lagrangian method.
//!
//! Both teachers pin `y = ry` and work in the plane of `w0` and `w_star`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::heuristics::{run_teacher, straight_step, TeacherPolicy};
use crate::optsolve::{augmented_lagrangian, minimize_projected, project_ball_slice, SolverOptions};
use crate::problem::{ProblemSpec, TeachingInput, Trajectory};
use crate::subspace::{reduce, PlaneBasis};
use crate::Vector;

/// Forward pass on flat storage: `xs` holds `T` inputs of length `n`; the
/// returned buffer holds the `T + 1` states.
fn forward(w0: &[f64], xs: &[f64], eta: f64, ry: f64) -> Vec<f64> {
    let n = w0.len();
    let steps = xs.len() / n;
    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(w0);
    for t in 0..steps {
        let x = &xs[t * n..(t + 1) * n];
        let w = &states[t * n..(t + 1) * n];
        let s = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - ry;
        let next: Vec<f64> = w.iter().zip(x).map(|(wi, xi)| wi - eta * s * xi).collect();
        states.extend_from_slice(&next);
    }
    states
}

/// `|w_T - target|^2` and its gradient with respect to `xs`, by reverse accumulation.
fn objective_and_gradient(w0: &[f64], xs: &[f64], eta: f64, ry: f64, target: &[f64]) -> (f64, Vec<f64>) {
    let n = w0.len();
    let steps = xs.len() / n;
    let states = forward(w0, xs, eta, ry);
    let end = &states[steps * n..];
    let mut lam: Vec<f64> = end.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
    let value = 0.25 * lam.iter().map(|v| v * v).sum::<f64>();
    let mut grad = vec![0.0; xs.len()];
    for t in (0..steps).rev() {
        let x = &xs[t * n..(t + 1) * n];
        let w = &states[t * n..(t + 1) * n];
        let s = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - ry;
        let xl = x.iter().zip(&lam).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            grad[t * n + i] = -eta * (s * lam[i] + w[i] * xl);
        }
        for i in 0..n {
            lam[i] -= eta * x[i] * xl;
        }
    }
    (value, grad)
}

fn flatten(vs: &[Vector], n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(vs.len() * n);
    for v in vs {
        check_dim(n, v.len())?;
        out.extend(v.iter());
    }
    Ok(out)
}

fn unflatten(flat: &[f64], n: usize) -> Vec<Vector> {
    flat.chunks(n).map(Vector::from_column_slice).collect()
}

/// Simulate the learner with `y = ry`: terminal state and all `T + 1` states.
pub fn rollout(w0: &Vector, inputs: &[Vector], eta: f64, ry: f64) -> Result<(Vector, Vec<Vector>)> {
    let n = w0.len();
    let states = unflatten(&forward(w0.as_slice(), &flatten(inputs, n)?, eta, ry), n);
    Ok((states.last().expect("at least the initial state").clone(), states))
}

/// Gradient of `|w_T - target|^2` with respect to every input.
pub fn rollout_gradient(w0: &Vector, inputs: &[Vector], eta: f64, ry: f64, target: &Vector) -> Result<Vec<Vector>> {
    let n = w0.len();
    check_dim(n, target.len())?;
    let (_, grad) = objective_and_gradient(w0.as_slice(), &flatten(inputs, n)?, eta, ry, target.as_slice());
    Ok(unflatten(&grad, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSettings {
    /// Feasibility threshold on `|w_T - w*|`.
    pub residual_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl NlpSettings {
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        Self {
            residual_tol: 1e-6 * spec.w_star.norm().max(1.0),
            restarts: 8,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "residual_tol",
                reason: "must be positive".into(),
            });
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter {
                name: "restarts",
                reason: "need at least one start".into(),
            });
        }
        self.solver.validate()
    }
}

/// STRAIGHT's input sequence (run to `tol`) on `spec`.
fn straight_inputs(spec: &ProblemSpec, tol: f64, max_steps: usize) -> Result<Option<Vec<Vector>>> {
    let run = run_teacher(&TeacherPolicy::straight(), spec, max_steps, tol)?;
    Ok(run
        .converged
        .then(|| run.trajectory.inputs.into_iter().map(|u| u.x).collect()))
}

fn lift_inputs(basis: &PlaneBasis, xs: &[f64]) -> Result<Vec<Vector>> {
    xs.chunks(2)
        .map(|c| basis.lift(&Vector::from_column_slice(c)))
        .collect()
}

/// Search for `T` inputs that bring the learner within `residual_tol` of `w*`.
pub fn nlp_feasible(steps: usize, spec: &ProblemSpec, settings: &NlpSettings) -> Result<Option<Trajectory>> {
    spec.validate()?;
    settings.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: "must be at least 1".into(),
        });
    }
    let (basis, planar) = reduce(spec)?;
    let seed_inputs = straight_inputs(&planar, settings.residual_tol, steps)?.unwrap_or_else(|| {
        run_teacher(&TeacherPolicy::straight(), &planar, steps, settings.residual_tol)
            .map(|r| r.trajectory.inputs.into_iter().map(|u| u.x).collect())
            .unwrap_or_default()
    });
    let mut base = flatten(&seed_inputs, 2)?;
    base.resize(2 * steps, 0.0);
    feasible_from(steps, spec, &basis, &planar, &base, settings)
}

fn feasible_from(
    steps: usize,
    spec: &ProblemSpec,
    basis: &PlaneBasis,
    planar: &ProblemSpec,
    base: &[f64],
    settings: &NlpSettings,
) -> Result<Option<Trajectory>> {
    let (rx, ry, eta) = (planar.rx, planar.ry, planar.eta);
    let w0 = planar.w0.as_slice().to_vec();
    let target = planar.w_star.as_slice().to_vec();
    let opts = SolverOptions {
        target_objective: Some(0.25 * settings.residual_tol * settings.residual_tol),
        ..settings.solver.clone()
    };
    let objective = |z: &Vector| {
        let (f, g) = objective_and_gradient(&w0, z.as_slice(), eta, ry, &target);
        (f, Vector::from_vec(g))
    };
    let certify = |z: &Vector| -> Result<Option<Trajectory>> {
        let inputs = lift_inputs(basis, z.as_slice())?
            .into_iter()
            .map(|x| TeachingInput::new(x, ry))
            .collect();
        let traj = Trajectory::replay(spec.w0.clone(), inputs, spec.eta, &spec.w_star)?;
        Ok((traj.terminal_residual <= settings.residual_tol).then_some(traj))
    };
    let ball = |z: &mut Vector| z.as_mut_slice().chunks_mut(2).for_each(|c| project_ball_slice(c, rx));
    let sphere = |z: &mut Vector| z.as_mut_slice().chunks_mut(2).for_each(|c| project_sphere_slice(c, rx));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ steps as u64);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    for start in 0..settings.restarts {
        let scale = 0.5 * rx * start as f64 / settings.restarts as f64;
        let z0 = Vector::from_iterator(2 * steps, base.iter().map(|b| b + scale * noise.sample(&mut rng)));
        let out = minimize_projected(objective, ball, &z0, &opts)?;
        let Some(found) = certify(&out.point)? else {
            continue;
        };
        if spec.w0 == spec.w_star {
            return Ok(Some(found));
        }
        // Prefer a certificate that spends the full input norm at every step.
        let full = minimize_projected(objective, sphere, &out.point, &opts)?;
        return Ok(Some(certify(&full.point)?.unwrap_or(found)));
    }
    Ok(None)
}

/// Radial projection onto the sphere of radius `r`; the origin maps to the first axis.
fn project_sphere_slice(x: &mut [f64], r: f64) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v *= r / n);
    } else {
        x.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = if i == 0 { r } else { 0.0 });
    }
}

/// Default cap on STRAIGHT's run when it provides the upper bound on `T`.
pub const STRAIGHT_BOUND_STEPS: usize = 1_000_000;

/// Smallest feasible `T` and its certificate, with STRAIGHT's count as upper bound.
pub fn nlp_min_t(spec: &ProblemSpec, settings: &NlpSettings) -> Result<(usize, Trajectory)> {
    spec.validate()?;
    settings.validate()?;
    if spec.w0 == spec.w_star {
        return Ok((0, Trajectory::start(spec.w0.clone(), spec.eta, &spec.w_star)));
    }
    let (_, planar) = reduce(spec)?;
    let t_hi = straight_inputs(&planar, settings.residual_tol, STRAIGHT_BOUND_STEPS)?
        .ok_or(Error::NoUpperBound {
            max_steps: STRAIGHT_BOUND_STEPS,
        })?
        .len();
    nlp_min_t_below(spec, settings, t_hi)
}

/// As [`nlp_min_t`] with an explicit upper bound `t_hi`, which must be feasible.
pub fn nlp_min_t_below(spec: &ProblemSpec, settings: &NlpSettings, t_hi: usize) -> Result<(usize, Trajectory)> {
    spec.validate()?;
    if spec.w0 == spec.w_star {
        return Ok((0, Trajectory::start(spec.w0.clone(), spec.eta, &spec.w_star)));
    }
    let mut hi = t_hi.max(1);
    let mut best = nlp_feasible(hi, spec, settings)?
        .ok_or_else(|| Error::Precondition(format!("no feasible input sequence found at the upper bound T = {hi}")))?;
    let mut lo = 0;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match nlp_feasible(mid, spec, settings)? {
            Some(traj) => {
                hi = mid;
                best = traj;
            }
            None => lo = mid,
        }
    }
    Ok((hi, best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnlpSettings {
    /// Number of mesh intervals.
    pub mesh: usize,
    pub solver: SolverOptions,
}

impl Default for CnlpSettings {
    fn default() -> Self {
        Self {
            mesh: 100,
            solver: SolverOptions {
                grad_tol: 1e-6,
                max_inner: 20_000,
                ..SolverOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnlpSolution {
    pub t_f: f64,
    pub mesh_times: Vec<f64>,
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub defect_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Smallest admissible final time.
const MIN_FINAL_TIME: f64 = 1e-6;

/// Layout of the decision vector `[t_f, w_1..w_{K-1}, x_0..x_K]` in the plane.
struct Collocation {
    k: usize,
    ry: f64,
    w0: [f64; 2],
    w_end: [f64; 2],
}

impl Collocation {
    fn len(&self) -> usize {
        1 + 2 * (self.k - 1) + 2 * (self.k + 1)
    }

    fn state(&self, z: &[f64], j: usize) -> [f64; 2] {
        if j == 0 {
            self.w0
        } else if j == self.k {
            self.w_end
        } else {
            let o = 1 + 2 * (j - 1);
            [z[o], z[o + 1]]
        }
    }

    fn input_offset(&self, j: usize) -> usize {
        1 + 2 * (self.k - 1) + 2 * j
    }

    fn input(&self, z: &[f64], j: usize) -> [f64; 2] {
        let o = self.input_offset(j);
        [z[o], z[o + 1]]
    }

    fn rate(&self, w: [f64; 2], x: [f64; 2]) -> [f64; 2] {
        let s = self.ry - (w[0] * x[0] + w[1] * x[1]);
        [s * x[0], s * x[1]]
    }

    fn defects(&self, z: &[f64]) -> Vector {
        let h = z[0] / self.k as f64;
        let mut c = Vector::zeros(2 * self.k);
        let mut prev = self.rate(self.state(z, 0), self.input(z, 0));
        for j in 0..self.k {
            let (a, b) = (self.state(z, j), self.state(z, j + 1));
            let next = self.rate(b, self.input(z, j + 1));
            for i in 0..2 {
                c[2 * j + i] = b[i] - a[i] - 0.5 * h * (prev[i] + next[i]);
            }
            prev = next;
        }
        c
    }

    /// `J(z)^T mu` for the defect Jacobian.
    fn defects_vjp(&self, z: &[f64], mu: &Vector) -> Vector {
        let k = self.k;
        let h = z[0] / k as f64;
        let mut g = Vector::zeros(self.len());
        let mu_at = |j: usize| [mu[2 * j], mu[2 * j + 1]];
        for j in 0..=k {
            let (w, x) = (self.state(z, j), self.input(z, j));
            let f = self.rate(w, x);
            let mut nu = [0.0; 2];
            if j >= 1 {
                let m = mu_at(j - 1);
                nu = [nu[0] + m[0], nu[1] + m[1]];
            }
            if j < k {
                let m = mu_at(j);
                nu = [nu[0] + m[0], nu[1] + m[1]];
            }
            // d/dt_f of -(h/2)(f_j + f_{j+1}) summed over both neighbouring defects.
            g[0] -= 0.5 / k as f64 * (f[0] * nu[0] + f[1] * nu[1]);
            let s = self.ry - (w[0] * x[0] + w[1] * x[1]);
            let xnu = x[0] * nu[0] + x[1] * nu[1];
            let o = self.input_offset(j);
            for i in 0..2 {
                g[o + i] = -0.5 * h * (s * nu[i] - w[i] * xnu);
            }
            if 0 < j && j < k {
                let (before, after) = (mu_at(j - 1), mu_at(j));
                let o = 1 + 2 * (j - 1);
                for i in 0..2 {
                    g[o + i] = before[i] - after[i] + 0.5 * h * x[i] * xnu;
                }
            }
        }
        g
    }
}

/// Continuous minimum-time teaching by trapezoidal collocation on `settings.mesh` intervals.
pub fn cnlp_solve(spec: &ProblemSpec, settings: &CnlpSettings) -> Result<CnlpSolution> {
    spec.validate()?;
    settings.solver.validate()?;
    let k = settings.mesh;
    if k < 10 {
        return Err(Error::InvalidParameter {
            name: "mesh",
            reason: format!("need at least 10 intervals, got {k}"),
        });
    }
    let (basis, planar) = reduce(spec)?;
    let layout = Collocation {
        k,
        ry: planar.ry,
        w0: [planar.w0[0], planar.w0[1]],
        w_end: [planar.w_star[0], planar.w_star[1]],
    };

    let straight = run_teacher(
        &TeacherPolicy::straight(),
        &planar,
        STRAIGHT_BOUND_STEPS,
        1e-3 * planar.ry,
    )?;
    let mut z0 = Vector::zeros(layout.len());
    z0[0] = (planar.eta * straight.steps as f64).max(MIN_FINAL_TIME);
    let mut last_x = Vector::zeros(2);
    for j in 0..=k {
        let s = j as f64 / k as f64;
        let w = (1.0 - s) * &planar.w0 + s * &planar.w_star;
        if 0 < j && j < k {
            z0[1 + 2 * (j - 1)] = w[0];
            z0[2 + 2 * (j - 1)] = w[1];
        }
        if let Ok(u) = straight_step(&w, &planar) {
            last_x = u.x;
        }
        let o = layout.input_offset(j);
        z0[o] = last_x[0];
        z0[o + 1] = last_x[1];
    }

    let rx = planar.rx;
    let first_input = layout.input_offset(0);
    let project = |z: &mut Vector| {
        let s = z.as_mut_slice();
        s[0] = s[0].max(MIN_FINAL_TIME);
        s[first_input..].chunks_mut(2).for_each(|c| project_ball_slice(c, rx));
    };
    let mut unit = Vector::zeros(layout.len());
    unit[0] = 1.0;
    let constraints = (
        |z: &Vector| layout.defects(z.as_slice()),
        |z: &Vector, mu: &Vector| layout.defects_vjp(z.as_slice(), mu),
    );
    let out = augmented_lagrangian(
        |z: &Vector| (z[0], unit.clone()),
        &constraints,
        project,
        &z0,
        &settings.solver,
    )?;

    let z = out.point.as_slice();
    let t_f = z[0];
    let states = (0..=k)
        .map(|j| basis.lift(&Vector::from_column_slice(&layout.state(z, j))))
        .collect::<Result<Vec<_>>>()?;
    let inputs = (0..=k)
        .map(|j| basis.lift(&Vector::from_column_slice(&layout.input(z, j))))
        .collect::<Result<Vec<_>>>()?;
    Ok(CnlpSolution {
        t_f,
        mesh_times: (0..=k).map(|j| t_f * j as f64 / k as f64).collect(),
        states,
        inputs,
        defect_norm: out.constraint_violation,
        converged: out.converged,
        iterations: out.iterations,
    })
}
