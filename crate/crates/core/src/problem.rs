//! The teaching instance and the least-squares gradient-descent learner.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::Vector;

/// Slack allowed on the input constraints when checking admissibility.
pub const TOL_FEAS: f64 = 1e-9;

/// Bounds of the admissible input set `|x| <= rx`, `|y| <= ry`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub rx: f64,
    pub ry: f64,
}

impl InputBounds {
    pub fn new(rx: f64, ry: f64) -> Result<Self> {
        positive("rx", rx)?;
        positive("ry", ry)?;
        Ok(Self { rx, ry })
    }

    /// Radius of the ball separating the two negatively aligned regimes.
    pub fn switching_radius(&self) -> f64 {
        self.ry / (2.0 * self.rx)
    }
}

/// A teaching instance: drive the learner from `w0` to `w_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub w0: Vector,
    pub w_star: Vector,
    pub eta: f64,
    pub rx: f64,
    pub ry: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a positive finite number, got {v}"),
        })
    }
}

impl ProblemSpec {
    pub fn new(w0: Vector, w_star: Vector, eta: f64, rx: f64, ry: f64) -> Result<Self> {
        let spec = Self {
            w0,
            w_star,
            eta,
            rx,
            ry,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor from slices.
    pub fn from_slices(w0: &[f64], w_star: &[f64], eta: f64, rx: f64, ry: f64) -> Result<Self> {
        Self::new(
            Vector::from_column_slice(w0),
            Vector::from_column_slice(w_star),
            eta,
            rx,
            ry,
        )
    }

    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        positive("rx", self.rx)?;
        positive("ry", self.ry)?;
        if self.w0.is_empty() {
            return Err(Error::InvalidParameter {
                name: "w0",
                reason: "dimension must be at least 1".into(),
            });
        }
        check_dim(self.w0.len(), self.w_star.len())?;
        if self.w0.iter().chain(self.w_star.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "w0/w_star",
                reason: "entries must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.w0.len()
    }

    pub fn bounds(&self) -> InputBounds {
        InputBounds {
            rx: self.rx,
            ry: self.ry,
        }
    }

    /// Same bounds and learning rate, different endpoints.
    pub fn with_endpoints(&self, w0: Vector, w_star: Vector) -> Self {
        Self {
            w0,
            w_star,
            ..self.clone()
        }
    }
}

/// One training example `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachingInput {
    pub x: Vector,
    pub y: f64,
}

impl TeachingInput {
    pub fn new(x: Vector, y: f64) -> Self {
        Self { x, y }
    }

    pub fn zero(n: usize, y: f64) -> Self {
        Self { x: Vector::zeros(n), y }
    }

    pub fn is_admissible(&self, bounds: InputBounds) -> bool {
        self.x.norm() <= bounds.rx + TOL_FEAS && self.y.abs() <= bounds.ry + TOL_FEAS
    }
}

/// A discrete teaching sequence together with the learner states it visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<TeachingInput>,
    pub eta: f64,
    pub terminal_residual: f64,
}

impl Trajectory {
    /// Empty trajectory sitting at `w0`.
    pub fn start(w0: Vector, eta: f64, w_star: &Vector) -> Self {
        let terminal_residual = (&w0 - w_star).norm();
        Self {
            states: vec![w0],
            inputs: Vec::new(),
            eta,
            terminal_residual,
        }
    }

    /// Simulate `inputs` from `w0`.
    pub fn replay(w0: Vector, inputs: Vec<TeachingInput>, eta: f64, w_star: &Vector) -> Result<Self> {
        let mut traj = Self::start(w0, eta, w_star);
        for u in inputs {
            traj.push(u, w_star)?;
        }
        Ok(traj)
    }

    /// Apply one more input.
    pub fn push(&mut self, u: TeachingInput, w_star: &Vector) -> Result<&Vector> {
        let next = step(self.last_state(), &u, self.eta)?;
        self.terminal_residual = (&next - w_star).norm();
        self.states.push(next);
        self.inputs.push(u);
        Ok(self.last_state())
    }

    pub fn last_state(&self) -> &Vector {
        self.states.last().expect("trajectory always holds w0")
    }

    /// Number of inputs consumed.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Largest discrepancy between the stored states and a fresh replay of the inputs.
    pub fn max_replay_error(&self) -> Result<f64> {
        let mut err: f64 = 0.0;
        for (t, u) in self.inputs.iter().enumerate() {
            let next = step(&self.states[t], u, self.eta)?;
            err = err.max((&next - &self.states[t + 1]).norm());
        }
        Ok(err)
    }
}

/// One gradient-descent update on the squared loss of `(x, y)`.
pub fn step(w: &Vector, u: &TeachingInput, eta: f64) -> Result<Vector> {
    check_dim(w.len(), u.x.len())?;
    let residual = w.dot(&u.x) - u.y;
    Ok(w - (eta * residual) * &u.x)
}

/// Largest possible `|step(w, u) - w|` over admissible inputs (a loose bound).
pub fn displacement_bound(w: &Vector, bounds: InputBounds, eta: f64) -> f64 {
    eta * bounds.rx * (bounds.ry + bounds.rx * w.norm())
}

/// Replace `(x, y)` by `(a x, ry)` with `a` in `[-1, 1]` so that the update is unchanged.
///
/// `a` is a root of `(w.x) a^2 - ry a + (y - w.x)`; when two roots lie in
/// `[-1, 1]` the one of smaller magnitude is returned.
pub fn rescale_input(w: &Vector, u: &TeachingInput, ry: f64) -> Result<TeachingInput> {
    check_dim(w.len(), u.x.len())?;
    positive("ry", ry)?;
    if u.y.abs() > ry + TOL_FEAS {
        return Err(Error::Precondition(format!("label {} exceeds the bound {ry}", u.y)));
    }
    let b = w.dot(&u.x);
    let c = u.y - b;
    let disc = (ry * ry - 4.0 * b * c).max(0.0);
    // Stable small root: c / q with q = (ry + sqrt(disc)) / 2 >= ry / 2 > 0.
    let a = 2.0 * c / (ry + disc.sqrt());
    assert!(
        a.abs() <= 1.0 + 1e-9,
        "rescaling root {a} outside [-1, 1] (w.x = {b}, y = {})",
        u.y
    );
    Ok(TeachingInput {
        x: a.clamp(-1.0, 1.0) * &u.x,
        y: ry,
    })
}

/// An admissible input that moves `w` exactly onto `w_star` in one update, if any.
pub fn exact_landing(w: &Vector, spec: &ProblemSpec) -> Result<Option<TeachingInput>> {
    check_dim(spec.dim(), w.len())?;
    let r = &spec.w_star - w;
    let dist = r.norm();
    if dist == 0.0 {
        return Err(Error::Precondition("exact_landing called at the target".into()));
    }
    let d = r / dist;
    let c = w.dot(&d);
    // eta (ry - a c) a = dist  <=>  c a^2 - ry a + dist / eta = 0
    let k = dist / spec.eta;
    let disc = spec.ry * spec.ry - 4.0 * c * k;
    if disc < 0.0 {
        return Ok(None);
    }
    let a = 2.0 * k / (spec.ry + disc.sqrt());
    if a > spec.rx + TOL_FEAS {
        return Ok(None);
    }
    Ok(Some(TeachingInput { x: a * d, y: spec.ry }))
}

/// Samples of the boundary of the one-step reachable set from `w` (2D only).
///
/// The set is star-shaped about `w`: along the direction `u(theta)` the
/// displacement is `eta * a * (ry - a w.u)` for `a` in `[0, rx]`, and the
/// boundary point takes the largest such value.
pub fn reachable_boundary(w: &Vector, spec: &ProblemSpec, samples: usize) -> Result<Vec<Vector>> {
    if w.len() != 2 {
        return Err(Error::Precondition(format!(
            "reachable_boundary needs a 2D state, got dimension {}",
            w.len()
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "must be positive".into(),
        });
    }
    let (rx, ry) = (spec.rx, spec.ry);
    Ok((0..samples)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / samples as f64;
            let u = Vector::from_column_slice(&[theta.cos(), theta.sin()]);
            let c = w.dot(&u);
            let a = if c > 0.0 { rx.min(ry / (2.0 * c)) } else { rx };
            w + (spec.eta * a * (ry - a * c)) * u
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn step_examples() {
        let out = step(&v(&[0.0, 1.0]), &TeachingInput::new(v(&[1.0, 0.0]), 1.0), 0.01).unwrap();
        assert_eq!(out, v(&[0.01, 1.0]));

        let w = v(&[0.3, -0.7]);
        let out = step(&w, &TeachingInput::zero(2, 1.0), 0.5).unwrap();
        assert_eq!(out, w);

        // zero residual leaves the state unchanged
        let w = v(&[1.0, 0.0]);
        let x = v(&[0.4, 0.9]);
        let out = step(&w, &TeachingInput::new(x.clone(), w.dot(&x)), 0.3).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn step_dimension_mismatch() {
        let err = step(&v(&[0.0, 1.0]), &TeachingInput::zero(3, 1.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], -1.0, 1.0, 1.0).is_err());
        assert!(ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.1, 0.0, 1.0).is_err());
        assert!(ProblemSpec::from_slices(&[0.0, 1.0], &[1.0], 0.1, 1.0, 1.0).is_err());
        assert!(ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.1, 1.0, 1.0).is_ok());
    }

    #[test]
    fn rescale_at_bound_is_identity() {
        let w = v(&[0.7, -0.2]);
        let u = TeachingInput::new(v(&[0.3, 0.5]), 1.0);
        let r = rescale_input(&w, &u, 1.0).unwrap();
        assert_abs_diff_eq!(r.x, u.x, epsilon = 1e-15);
        assert_eq!(r.y, 1.0);
    }

    #[test]
    fn rescale_linear_case() {
        let w = v(&[1.0, 0.0]);
        let u = TeachingInput::new(v(&[0.0, 0.5]), 0.4);
        let r = rescale_input(&w, &u, 1.0).unwrap();
        assert_abs_diff_eq!(r.x, v(&[0.0, 0.2]), epsilon = 1e-15);
    }

    #[test]
    fn rescale_rejects_oversized_label() {
        let u = TeachingInput::new(v(&[0.0, 0.5]), 1.5);
        assert!(rescale_input(&v(&[1.0, 0.0]), &u, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn rescale_preserves_update(
            w in proptest::collection::vec(-5.0f64..5.0, 3),
            dir in proptest::collection::vec(-1.0f64..1.0, 3),
            scale in 0.0f64..1.0,
            y in -1.0f64..1.0,
            eta in 0.001f64..1.0,
        ) {
            let w = Vector::from_vec(w);
            let dir = Vector::from_vec(dir);
            let x = if dir.norm() > 0.0 { scale * &dir / dir.norm() } else { dir };
            let u = TeachingInput::new(x, y);
            let r = rescale_input(&w, &u, 1.0).unwrap();
            let unit = InputBounds { rx: 1.0, ry: 1.0 };
            prop_assert!(r.is_admissible(unit));
            let a = step(&w, &u, eta).unwrap();
            let b = step(&w, &r, eta).unwrap();
            prop_assert!((a - b).norm() <= 1e-12);
        }

        #[test]
        fn displacement_bound_holds(
            w in proptest::collection::vec(-5.0f64..5.0, 2),
            theta in 0.0f64..std::f64::consts::TAU,
            scale in 0.0f64..1.0,
            y in -1.0f64..1.0,
        ) {
            let w = Vector::from_vec(w);
            let u = TeachingInput::new(scale * v(&[theta.cos(), theta.sin()]), y);
            let bounds = InputBounds { rx: 1.0, ry: 1.0 };
            let moved = (step(&w, &u, 0.1).unwrap() - &w).norm();
            prop_assert!(moved <= displacement_bound(&w, bounds, 0.1) + 1e-15);
        }
    }

    #[test]
    fn exact_landing_hits_target() {
        let spec = ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.05, 1.0, 1.0).unwrap();
        let d = v(&[1.0, -1.0]) / 2f64.sqrt();
        let w = &spec.w_star - (spec.eta * spec.ry * 0.3) * &d;
        let u = exact_landing(&w, &spec).unwrap().expect("landing exists");
        assert!(u.is_admissible(spec.bounds()));
        // Oracle: the scalar quadratic c a^2 - ry a + dist/eta = 0 solved independently.
        let dist = (&spec.w_star - &w).norm();
        let c = w.dot(&d);
        let roots = [
            (spec.ry - (spec.ry.powi(2) - 4.0 * c * dist / spec.eta).sqrt()) / (2.0 * c),
            (spec.ry + (spec.ry.powi(2) - 4.0 * c * dist / spec.eta).sqrt()) / (2.0 * c),
        ];
        let expected = roots
            .into_iter()
            .filter(|a| (0.0..=1.0).contains(a))
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(u.x.norm(), expected, epsilon = 1e-12);
        let landed = step(&w, &u, spec.eta).unwrap();
        assert!((landed - &spec.w_star).norm() < 1e-14);
    }

    #[test]
    fn exact_landing_out_of_reach() {
        let spec = ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.01, 1.0, 1.0).unwrap();
        let w = v(&[0.0, 1.0]);
        let bound = displacement_bound(&w, spec.bounds(), spec.eta);
        assert!((&spec.w_star - &w).norm() > bound);
        assert_eq!(exact_landing(&w, &spec).unwrap(), None);
    }

    #[test]
    fn exact_landing_at_target_is_error() {
        let spec = ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.01, 1.0, 1.0).unwrap();
        assert!(exact_landing(&spec.w_star.clone(), &spec).is_err());
    }

    #[test]
    fn reachable_boundary_at_origin_is_circle() {
        let spec = ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.1, 0.7, 1.3).unwrap();
        let pts = reachable_boundary(&Vector::zeros(2), &spec, 64).unwrap();
        assert_eq!(pts.len(), 64);
        for p in pts {
            assert_abs_diff_eq!(p.norm(), 0.1 * 0.7 * 1.3, epsilon = 1e-15);
        }
    }

    #[test]
    fn reachable_boundary_mirror_symmetric_about_radial_axis() {
        let spec = ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.1, 1.0, 1.0).unwrap();
        let samples = 720;
        let j = 100;
        let phi = std::f64::consts::TAU * j as f64 / samples as f64;
        let w = 1.7 * v(&[phi.cos(), phi.sin()]);
        let pts = reachable_boundary(&w, &spec, samples).unwrap();
        // Reflection about the line through the origin and w maps theta_k to theta_{2j-k}.
        let axis = &w / w.norm();
        for (k, p) in pts.iter().enumerate() {
            let mirrored = 2.0 * p.dot(&axis) * &axis - p;
            let partner = &pts[(2 * j + samples - k) % samples];
            assert!((mirrored - partner).norm() < 1e-12);
        }
    }

    #[test]
    fn reachable_boundary_contains_start() {
        let spec = ProblemSpec::from_slices(&[0.0, 1.0], &[1.0, 0.0], 0.1, 1.0, 1.0).unwrap();
        let w = v(&[0.3, -1.1]);
        let samples = 90;
        for (k, p) in reachable_boundary(&w, &spec, samples).unwrap().iter().enumerate() {
            let theta = std::f64::consts::TAU * k as f64 / samples as f64;
            // x = 0 is admissible, so every ray's extreme displacement is nonnegative.
            assert!((p - &w).dot(&v(&[theta.cos(), theta.sin()])) >= 0.0);
        }
        assert!(reachable_boundary(&v(&[0.0, 0.0, 1.0]), &spec, 8).is_err());
    }
}
