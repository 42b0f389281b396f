//! Forward integration of the state/co-state system and co-state shooting.
//!
//! Along an optimal trajectory `w' = (ry - w.x) x` and `p' = (p.x) x`, where
//! `x` minimizes the pointwise objective of [`crate::pmp`]. Shooting fixes the
//! co-state magnitude through the zero-Hamiltonian condition and scans its
//! initial direction for trajectories that pass through `w_star`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::heuristics::{run_teacher, TeacherPolicy};
use crate::pmp::{costate_scale, pmp_point, Regime};
use crate::problem::{InputBounds, ProblemSpec};
use crate::subspace::reduce;
use crate::Vector;

/// Below this norm the co-state is considered collapsed.
const COSTATE_FLOOR: f64 = 1e-12;

/// Two refined angles closer than this describe the same candidate.
const DUPLICATE_ANGLE: f64 = 1e-3;

/// `(w', p')` at `(w, p)`.
pub fn pmp_rhs(w: &Vector, p: &Vector, bounds: InputBounds) -> Result<(Vector, Vector)> {
    let point = pmp_point(w, p, bounds)?;
    let x = &point.x;
    Ok(((bounds.ry - w.dot(x)) * x, p.dot(x) * x))
}

/// One classic fourth-order Runge-Kutta step of the autonomous system `y' = f(y)`.
pub fn rk4_step<F>(mut f: F, y: &Vector, dt: f64) -> Result<Vector>
where
    F: FnMut(&Vector) -> Result<Vector>,
{
    let k1 = f(y)?;
    let k2 = f(&(y + 0.5 * dt * &k1))?;
    let k3 = f(&(y + 0.5 * dt * &k2))?;
    let k4 = f(&(y + dt * &k3))?;
    Ok(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuousTrajectory {
    pub times: Vec<f64>,
    /// `(w, p)` at each sample.
    pub states: Vec<(Vector, Vector)>,
    pub inputs: Vec<Vector>,
    pub regimes: Vec<Regime>,
    /// Largest `|H|` over the samples.
    pub hamiltonian_drift: f64,
}

impl ContinuousTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, w: Vector, p: Vector, bounds: InputBounds) -> Result<()> {
        let point = pmp_point(&w, &p, bounds)?;
        self.hamiltonian_drift = self.hamiltonian_drift.max((point.value + 1.0).abs());
        self.times.push(t);
        self.inputs.push(point.x);
        self.regimes.push(point.regime);
        self.states.push((w, p));
        Ok(())
    }

    fn truncate(&mut self, len: usize) {
        self.times.truncate(len);
        self.states.truncate(len);
        self.inputs.truncate(len);
        self.regimes.truncate(len);
    }

    fn lift(&self, f: impl Fn(&Vector) -> Result<Vector>) -> Result<Self> {
        Ok(Self {
            times: self.times.clone(),
            states: self
                .states
                .iter()
                .map(|(w, p)| Ok((f(w)?, f(p)?)))
                .collect::<Result<_>>()?,
            inputs: self.inputs.iter().map(&f).collect::<Result<_>>()?,
            regimes: self.regimes.clone(),
            hamiltonian_drift: self.hamiltonian_drift,
        })
    }
}

fn split(y: &Vector, n: usize) -> (Vector, Vector) {
    (y.rows(0, n).into_owned(), y.rows(n, n).into_owned())
}

/// Integrate from `(w0, p0)` with fixed step `dt` up to `t_max`.
pub fn integrate(w0: &Vector, p0: &Vector, spec: &ProblemSpec, dt: f64, t_max: f64) -> Result<ContinuousTrajectory> {
    integrate_until(w0, p0, spec, dt, t_max, |_, _| false)
}

/// As [`integrate`], also stopping after the first sample where `stop(w, regime)` holds.
fn integrate_until<S>(
    w0: &Vector,
    p0: &Vector,
    spec: &ProblemSpec,
    dt: f64,
    t_max: f64,
    stop: S,
) -> Result<ContinuousTrajectory>
where
    S: Fn(&Vector, Regime) -> bool,
{
    check_dim(w0.len(), p0.len())?;
    for (name, v) in [("dt", dt), ("t_max", t_max)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be positive and finite, got {v}"),
            });
        }
    }
    let bounds = spec.bounds();
    let n = w0.len();
    let mut traj = ContinuousTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        inputs: Vec::new(),
        regimes: Vec::new(),
        hamiltonian_drift: 0.0,
    };
    traj.push(0.0, w0.clone(), p0.clone(), bounds)?;
    let mut y = Vector::from_iterator(2 * n, w0.iter().chain(p0.iter()).copied());
    let mut t = 0.0;
    let rhs = |y: &Vector| -> Result<Vector> {
        let (w, p) = split(y, n);
        let (dw, dp) = pmp_rhs(&w, &p, bounds)?;
        Ok(Vector::from_iterator(2 * n, dw.iter().chain(dp.iter()).copied()))
    };
    while t < t_max * (1.0 - 1e-12) {
        let h = dt.min(t_max - t);
        y = rk4_step(rhs, &y, h)?;
        t += h;
        let (w, p) = split(&y, n);
        let norm = p.norm();
        if !(norm >= COSTATE_FLOOR) {
            return Err(Error::CostateCollapse { time: t, norm });
        }
        traj.push(t, w, p, bounds)?;
        let last = traj.len() - 1;
        if stop(&traj.states[last].0, traj.regimes[last]) {
            break;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrajectory {
    /// Initial co-state angle in the reduced plane.
    pub phi0: f64,
    pub t_hit: f64,
    pub miss_distance: f64,
    /// Samples up to the closest approach to `w_star`.
    pub trajectory: ContinuousTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingSettings {
    pub angle_samples: usize,
    pub dt: f64,
    /// Integration horizon; estimated from a STRAIGHT run when absent.
    pub t_max: Option<f64>,
    pub hit_tol: f64,
    /// Grid minima with a larger miss are not refined; defaults to a quarter
    /// of `|w0 - w_star|`.
    pub bracket_threshold: Option<f64>,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        Self {
            angle_samples: 360,
            dt: 1e-3,
            t_max: None,
            hit_tol: 1e-3,
            bracket_threshold: None,
        }
    }
}

/// Closest approach of the piecewise-linear state path to `target`:
/// `(distance, interpolated time, index of the segment end)`.
fn closest_approach(traj: &ContinuousTrajectory, target: &Vector) -> (f64, f64, usize) {
    let first = &traj.states[0].0;
    let mut best = ((first - target).norm(), 0.0, 0);
    for i in 1..traj.len() {
        let (a, b) = (&traj.states[i - 1].0, &traj.states[i].0);
        let d = b - a;
        let dd = d.norm_squared();
        let tau = if dd > 0.0 {
            ((target - a).dot(&d) / dd).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = (a + tau * &d - target).norm();
        if dist < best.0 {
            let t = traj.times[i - 1] + tau * (traj.times[i] - traj.times[i - 1]);
            best = (dist, t, i);
        }
    }
    best
}

struct Shooter<'a> {
    spec: &'a ProblemSpec,
    dt: f64,
    t_max: f64,
}

impl Shooter<'_> {
    fn shoot(&self, phi: f64) -> Result<CandidateTrajectory> {
        let spec = self.spec;
        let p0 = costate_scale(
            &spec.w0,
            &Vector::from_column_slice(&[phi.cos(), phi.sin()]),
            spec.bounds(),
        )?;
        let target_norm = spec.w_star.norm();
        // The outside regime only increases |w|: once past the target norm it cannot return.
        let escaped = |w: &Vector, regime: Regime| regime == Regime::NegAlignedOutside && w.norm() > target_norm;
        let mut trajectory = integrate_until(&spec.w0, &p0, spec, self.dt, self.t_max, escaped)?;
        let (miss_distance, t_hit, end) = closest_approach(&trajectory, &spec.w_star);
        trajectory.truncate(end + 1);
        Ok(CandidateTrajectory {
            phi0: phi,
            t_hit,
            miss_distance,
            trajectory,
        })
    }

    fn miss(&self, phi: f64) -> f64 {
        self.shoot(phi).map_or(f64::INFINITY, |c| c.miss_distance)
    }

    /// Golden-section search for the smallest miss on `[lo, hi]`.
    fn refine(&self, mut lo: f64, mut hi: f64, hit_tol: f64) -> Result<CandidateTrajectory> {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut fa, mut fb) = (self.miss(a), self.miss(b));
        for _ in 0..80 {
            if fa.min(fb) <= hit_tol || hi - lo < 1e-13 {
                break;
            }
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - g * (hi - lo);
                fa = self.miss(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + g * (hi - lo);
                fb = self.miss(b);
            }
        }
        self.shoot(if fa <= fb { a } else { b })
    }
}

/// Default shooting horizon: twice the continuous time STRAIGHT needs.
fn default_horizon(spec: &ProblemSpec) -> Result<f64> {
    let eta = 1e-2;
    let probe = ProblemSpec { eta, ..spec.clone() };
    let run = run_teacher(&TeacherPolicy::straight(), &probe, 1_000_000, 1e-3 * spec.ry)?;
    Ok((2.0 * eta * run.steps as f64).max(1.0))
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Scan initial co-state directions for trajectories passing within `hit_tol`
/// of `w_star`. Candidates are sorted by `t_hit`; an empty list means none was found.
pub fn find_candidates(spec: &ProblemSpec, settings: &ShootingSettings) -> Result<Vec<CandidateTrajectory>> {
    spec.validate()?;
    if settings.angle_samples < 3 {
        return Err(Error::InvalidParameter {
            name: "angle_samples",
            reason: "need at least 3 angles".into(),
        });
    }
    if !(settings.hit_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "hit_tol",
            reason: "must be positive".into(),
        });
    }
    let (basis, planar) = reduce(spec)?;
    let gap = (&spec.w0 - &spec.w_star).norm();
    if gap <= settings.hit_tol {
        let p0 = costate_scale(&planar.w0, &Vector::from_column_slice(&[1.0, 0.0]), spec.bounds())?;
        let mut trajectory = ContinuousTrajectory {
            times: Vec::new(),
            states: Vec::new(),
            inputs: Vec::new(),
            regimes: Vec::new(),
            hamiltonian_drift: 0.0,
        };
        trajectory.push(0.0, planar.w0.clone(), p0, spec.bounds())?;
        return Ok(vec![CandidateTrajectory {
            phi0: 0.0,
            t_hit: 0.0,
            miss_distance: gap,
            trajectory: trajectory.lift(|c| basis.lift(c))?,
        }]);
    }

    let t_max = match settings.t_max {
        Some(t) => t,
        None => default_horizon(spec)?,
    };
    let shooter = Shooter {
        spec: &planar,
        dt: settings.dt,
        t_max,
    };
    let n = settings.angle_samples;
    let h = TAU / n as f64;
    let misses: Vec<f64> = (0..n).map(|i| shooter.miss(h * i as f64)).collect();
    let threshold = settings.bracket_threshold.unwrap_or(0.25 * gap);

    let mut found: Vec<CandidateTrajectory> = Vec::new();
    for i in 0..n {
        let (prev, next) = (misses[(i + n - 1) % n], misses[(i + 1) % n]);
        if !(misses[i] <= prev && misses[i] <= next && misses[i] <= threshold) {
            continue;
        }
        let phi = h * i as f64;
        let cand = shooter.refine(phi - h, phi + h, settings.hit_tol)?;
        if cand.miss_distance > settings.hit_tol {
            continue;
        }
        let cand = CandidateTrajectory {
            phi0: cand.phi0.rem_euclid(TAU),
            ..cand
        };
        match found
            .iter_mut()
            .find(|c| angle_gap(c.phi0, cand.phi0) < DUPLICATE_ANGLE)
        {
            Some(existing) if existing.miss_distance <= cand.miss_distance => {}
            Some(existing) => *existing = cand,
            None => found.push(cand),
        }
    }
    found.sort_by(|a, b| a.t_hit.total_cmp(&b.t_hit).then(a.phi0.total_cmp(&b.phi0)));
    found
        .into_iter()
        .map(|c| {
            Ok(CandidateTrajectory {
                trajectory: c.trajectory.lift(|v| basis.lift(v))?,
                ..c
            })
        })
        .collect()
}
