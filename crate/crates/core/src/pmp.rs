//! Pointwise minimum-principle machinery.
//!
//! With `y` pinned to `ry`, the optimal input at `(w, p)` minimizes
//! `(ry - w.x)(p.x)` over `|x| <= rx`. The minimizer is available in closed
//! form whenever `w` and `p` are aligned (or `w = 0`); otherwise it lies on the
//! circle of radius `rx` in `span{w, p}` and is found by a one-dimensional
//! angular search.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::problem::InputBounds;
use crate::Vector;

/// Default relative tolerance separating the aligned regimes from the general one.
pub const TOL_ALIGN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `w = 0`.
    Origin,
    /// `w = a p` with `a > 0`.
    PositiveAligned,
    /// `w = -a p` with `|w| <= ry / (2 rx)`.
    NegAlignedInside,
    /// `w = -a p` with `|w| > ry / (2 rx)`.
    NegAlignedOutside,
    General,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Origin => "I",
            Regime::PositiveAligned => "II",
            Regime::NegAlignedInside => "III",
            Regime::NegAlignedOutside => "IV",
            Regime::General => "V",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "I" => Regime::Origin,
            "II" => Regime::PositiveAligned,
            "III" => Regime::NegAlignedInside,
            "IV" => Regime::NegAlignedOutside,
            "V" => Regime::General,
            _ => return None,
        })
    }

    fn chain_position(self) -> Option<u8> {
        match self {
            Regime::PositiveAligned => Some(0),
            Regime::Origin => Some(1),
            Regime::NegAlignedInside => Some(2),
            Regime::NegAlignedOutside => Some(3),
            Regime::General => None,
        }
    }

    /// Whether an optimal trajectory may pass from `self` to `next`.
    ///
    /// The aligned regimes form the chain II -> I -> III -> IV; sampled
    /// trajectories may skip links, so any forward move along the chain is
    /// accepted. The general regime only leads to itself.
    pub fn can_transition_to(self, next: Regime) -> bool {
        match (self.chain_position(), next.chain_position()) {
            (Some(a), Some(b)) => b >= a,
            (None, None) => true,
            _ => false,
        }
    }
}

/// `(w, p)` together with its minimizing input and regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmpPoint {
    pub w: Vector,
    pub p: Vector,
    pub x: Vector,
    pub value: f64,
    pub regime: Regime,
}

/// `p.((y - w.x) x) + 1`.
pub fn hamiltonian(w: &Vector, p: &Vector, x: &Vector, y: f64) -> Result<f64> {
    check_dim(w.len(), p.len())?;
    check_dim(w.len(), x.len())?;
    Ok((y - w.dot(x)) * p.dot(x) + 1.0)
}

fn qcqp_objective(w: &Vector, p: &Vector, x: &Vector, ry: f64) -> f64 {
    (ry - w.dot(x)) * p.dot(x)
}

fn nonzero_costate(p: &Vector) -> Result<f64> {
    let norm = p.norm();
    if norm > 0.0 && norm.is_finite() {
        Ok(norm)
    } else {
        Err(Error::Precondition(format!(
            "co-state must be nonzero and finite, got norm {norm}"
        )))
    }
}

/// Classify `(w, p)`. Alignment is the sine of the angle between `w` and `p`.
pub fn classify_regime(w: &Vector, p: &Vector, bounds: InputBounds, tol_align: f64) -> Result<Regime> {
    check_dim(w.len(), p.len())?;
    let pn = nonzero_costate(p)?;
    let wn = w.norm();
    if wn <= tol_align {
        return Ok(Regime::Origin);
    }
    let (wh, ph) = (w / wn, p / pn);
    let cos = wh.dot(&ph);
    let sin = (&wh - cos * &ph).norm();
    Ok(if sin > tol_align {
        Regime::General
    } else if cos > 0.0 {
        Regime::PositiveAligned
    } else if wn <= bounds.switching_radius() {
        Regime::NegAlignedInside
    } else {
        Regime::NegAlignedOutside
    })
}

/// Minimizing input of an aligned regime.
///
/// In the outside regime every `x` with `w.x = ry/2` is optimal; with a target
/// the maximal-curvature input toward it is chosen, otherwise the radial one.
pub fn regime_closed_form_input(
    regime: Regime,
    w: &Vector,
    p: &Vector,
    bounds: InputBounds,
    target: Option<&Vector>,
) -> Result<Vector> {
    check_dim(w.len(), p.len())?;
    match regime {
        Regime::Origin => Ok(-bounds.rx / nonzero_costate(p)? * p),
        Regime::PositiveAligned => Ok(-bounds.rx / w.norm() * w),
        Regime::NegAlignedInside => Ok(bounds.rx / w.norm() * w),
        Regime::NegAlignedOutside => {
            let wn = w.norm();
            let radius = bounds.switching_radius();
            if wn < radius * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "w.x = ry/2 has no solution with |x| <= rx when |w| = {wn} < {radius}"
                )));
            }
            match target {
                Some(t) if independent(w, t) => regime4_max_curvature_control(w, t, bounds),
                _ => Ok(bounds.ry / (2.0 * wn * wn) * w),
            }
        }
        Regime::General => Err(Error::Precondition(
            "the general regime has no closed-form input".into(),
        )),
    }
}

fn tangent_of(w: &Vector, target: &Vector) -> Option<Vector> {
    let wh = w.normalize();
    let rest = target - wh.dot(target) * &wh;
    let rest = &rest - wh.dot(&rest) * &wh;
    let scale = target.norm().max(f64::MIN_POSITIVE);
    (rest.norm() > 1e-12 * scale).then(|| rest.normalize())
}

fn independent(w: &Vector, target: &Vector) -> bool {
    check_dim(w.len(), target.len()).is_ok() && w.norm() > 0.0 && tangent_of(w, target).is_some()
}

/// `(ry - k cos t)(a cos t + b sin t)` and its first two derivatives.
struct CircleObjective {
    ry: f64,
    k: f64,
    a: f64,
    b: f64,
}

impl CircleObjective {
    fn value_cs(&self, c: f64, s: f64) -> f64 {
        (self.ry - self.k * c) * (self.a * c + self.b * s)
    }

    fn value(&self, t: f64) -> f64 {
        self.value_cs(t.cos(), t.sin())
    }

    fn derivatives(&self, t: f64) -> (f64, f64) {
        let (s, c) = t.sin_cos();
        let (s2, c2) = (2.0 * t).sin_cos();
        let d1 = -self.ry * self.a * s + self.ry * self.b * c + self.k * self.a * s2 - self.k * self.b * c2;
        let d2 = -self.ry * self.a * c - self.ry * self.b * s + 2.0 * self.k * self.a * c2 + 2.0 * self.k * self.b * s2;
        (d1, d2)
    }

    /// Newton on the derivative, kept inside `[lo, hi]`.
    fn polish(&self, mut t: f64, lo: f64, hi: f64) -> f64 {
        for _ in 0..30 {
            let (d1, d2) = self.derivatives(t);
            if d2 <= 0.0 {
                break;
            }
            let next = (t - d1 / d2).clamp(lo, hi);
            let done = (next - t).abs() < 1e-15;
            t = next;
            if done {
                break;
            }
        }
        t
    }

    /// Candidate critical angles: roots of the derivative, which becomes a
    /// quartic in `tan(t/2)`, plus `t = pi` where that substitution breaks down.
    fn critical_angles(&self) -> Vec<f64> {
        // g'(t) = P cos t + Q sin t + M cos 2t + N sin 2t
        let (p, q) = (self.ry * self.b, -self.ry * self.a);
        let (m, n) = (-self.k * self.b, self.k * self.a);
        // Coefficients of (1 + u^2)^2 g' in u = tan(t/2), highest degree first.
        let coeffs = [m - p, 2.0 * q - 4.0 * n, -6.0 * m, 2.0 * q + 4.0 * n, p + m];
        let mut angles = vec![PI];
        let roots = roots::find_roots_quartic(coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]);
        angles.extend(roots.as_ref().iter().map(|u| 2.0 * u.atan()));
        angles
    }

    fn global_min(&self) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for t0 in self.critical_angles() {
            let t = self.polish(t0, t0 - 0.1, t0 + 0.1);
            for t in [t0, t] {
                let v = self.value(t);
                if v < best.1 {
                    best = (t, v);
                }
            }
        }
        best
    }
}

/// Global minimizer of `(ry - w.x)(p.x)` over `|x| <= rx` and its value.
pub fn qcqp_minimize(w: &Vector, p: &Vector, bounds: InputBounds) -> Result<(Vector, f64)> {
    let point = pmp_point(w, p, bounds)?;
    Ok((point.x, point.value))
}

/// Solve the input minimization at `(w, p)` and record the regime.
pub fn pmp_point(w: &Vector, p: &Vector, bounds: InputBounds) -> Result<PmpPoint> {
    let regime = classify_regime(w, p, bounds, TOL_ALIGN)?;
    let x = match regime {
        Regime::General => general_regime_input(w, p, bounds),
        aligned => regime_closed_form_input(aligned, w, p, bounds, None)?,
    };
    let value = qcqp_objective(w, p, &x, bounds.ry);
    Ok(PmpPoint {
        w: w.clone(),
        p: p.clone(),
        x,
        value,
        regime,
    })
}

fn general_regime_input(w: &Vector, p: &Vector, bounds: InputBounds) -> Vector {
    let gamma = w.norm();
    let wh = w / gamma;
    let alpha = wh.dot(p);
    let rest = p - alpha * &wh;
    let rest = &rest - wh.dot(&rest) * &wh;
    let beta = rest.norm();
    let uh = rest / beta;
    let objective = CircleObjective {
        ry: bounds.ry,
        k: gamma * bounds.rx,
        a: alpha,
        b: beta,
    };
    let (theta, _) = objective.global_min();
    bounds.rx * (theta.cos() * wh + theta.sin() * uh)
}

/// Scale the direction `p_hat` so that the minimized objective equals `-1`.
pub fn costate_scale(w: &Vector, p_hat: &Vector, bounds: InputBounds) -> Result<Vector> {
    let unit = p_hat / nonzero_costate(p_hat)?;
    let (_, m) = qcqp_minimize(w, &unit, bounds)?;
    if !(m < 0.0) {
        return Err(Error::Precondition(format!(
            "minimized objective {m} is not negative; cannot normalize the co-state"
        )));
    }
    Ok(-unit / m)
}

/// Time for `|w|` to grow to `|w_star|` in the outside regime, where
/// `d|w|^2/dt = ry^2 / 2`.
pub fn regime4_time_to_target(w: &Vector, w_star: &Vector, ry: f64) -> Result<f64> {
    check_dim(w.len(), w_star.len())?;
    let (a, b) = (w.norm_squared(), w_star.norm_squared());
    if b < a {
        return Err(Error::Precondition(format!(
            "target norm {} is below current norm {}",
            b.sqrt(),
            a.sqrt()
        )));
    }
    Ok(2.0 * (b - a) / (ry * ry))
}

/// The outside-regime input with the fastest rotation toward `w_star`:
/// radial part `ry / (2|w|)` and the remaining norm spent tangentially.
pub fn regime4_max_curvature_control(w: &Vector, w_star: &Vector, bounds: InputBounds) -> Result<Vector> {
    check_dim(w.len(), w_star.len())?;
    let wn = w.norm();
    let radius = bounds.switching_radius();
    if wn < radius * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "max-curvature control needs |w| >= {radius}, got {wn}"
        )));
    }
    let tangent =
        tangent_of(w, w_star).ok_or_else(|| Error::Precondition("w and w_star are linearly dependent".into()))?;
    let radial = bounds.ry / (2.0 * wn);
    let side = (bounds.rx * bounds.rx - radial * radial).max(0.0).sqrt();
    Ok(radial / wn * w + side * tangent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn unit() -> InputBounds {
        InputBounds { rx: 1.0, ry: 1.0 }
    }

    /// Dense minimization over the disk in the plane of `w` and `p`, both 2D.
    fn disk_oracle(w: &Vector, p: &Vector, b: InputBounds) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..20_000 {
            let t = TAU * i as f64 / 20_000.0;
            for r in [b.rx, 0.75 * b.rx, 0.5 * b.rx, 0.25 * b.rx, 0.0] {
                let x = v(&[r * t.cos(), r * t.sin()]);
                best = best.min(qcqp_objective(w, p, &x, b.ry));
            }
        }
        // Interior stationary points along the aligned direction.
        let wn = w.norm();
        if wn > 0.0 {
            let t = (b.ry / (2.0 * wn)).min(b.rx);
            for sign in [-1.0, 1.0] {
                best = best.min(qcqp_objective(w, p, &(sign * t / wn * w), b.ry));
            }
        }
        best
    }

    #[test]
    fn hamiltonian_examples() {
        let h = hamiltonian(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &v(&[-1.0, 0.0]), 1.0).unwrap();
        assert_abs_diff_eq!(h, 0.0);
        assert_eq!(
            hamiltonian(&v(&[0.3, 1.0]), &v(&[2.0, 1.0]), &v(&[0.0, 0.0]), 1.0).unwrap(),
            1.0
        );
        assert!(hamiltonian(&v(&[0.0]), &v(&[1.0, 0.0]), &v(&[0.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn closed_form_regime_examples() {
        let (x, val) = qcqp_minimize(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), unit()).unwrap();
        assert_abs_diff_eq!(x, v(&[-1.0, 0.0]));
        assert_abs_diff_eq!(val, -1.0);

        let (x, val) = qcqp_minimize(&v(&[1.0, 0.0]), &v(&[0.5, 0.0]), unit()).unwrap();
        assert_abs_diff_eq!(x, v(&[-1.0, 0.0]));
        assert_abs_diff_eq!(val, -1.0);

        let x = regime_closed_form_input(Regime::Origin, &v(&[0.0, 0.0]), &v(&[0.0, 2.0]), unit(), None).unwrap();
        assert_abs_diff_eq!(x, v(&[0.0, -1.0]));
        let x = regime_closed_form_input(
            Regime::NegAlignedInside,
            &v(&[0.3, 0.0]),
            &v(&[-1.0, 0.0]),
            unit(),
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(x, v(&[1.0, 0.0]));
        let x = regime_closed_form_input(
            Regime::NegAlignedOutside,
            &v(&[1.0, 0.0]),
            &v(&[-1.0, 0.0]),
            unit(),
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(x, v(&[0.5, 0.0]));
        assert!(regime_closed_form_input(
            Regime::NegAlignedOutside,
            &v(&[0.2, 0.0]),
            &v(&[-1.0, 0.0]),
            unit(),
            None
        )
        .is_err());
        assert!(regime_closed_form_input(Regime::General, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), unit(), None).is_err());
    }

    #[test]
    fn classification_examples() {
        let c = |w: &[f64], p: &[f64]| classify_regime(&v(w), &v(p), unit(), TOL_ALIGN).unwrap();
        assert_eq!(c(&[0.0, 0.0], &[1.0, 0.0]), Regime::Origin);
        assert_eq!(c(&[0.3, 0.0], &[-1.2, 0.0]), Regime::NegAlignedInside);
        assert_eq!(c(&[0.8, 0.0], &[-1.2, 0.0]), Regime::NegAlignedOutside);
        assert_eq!(c(&[0.8, 0.0], &[1.2, 0.0]), Regime::PositiveAligned);
        assert_eq!(c(&[1.0, 0.0], &[0.0, 1.0]), Regime::General);
        assert!(classify_regime(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), unit(), TOL_ALIGN).is_err());
        assert!(qcqp_minimize(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), unit()).is_err());
    }

    #[test]
    fn circle_minimum_matches_dense_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let f = CircleObjective {
                ry: rng.gen_range(0.1..3.0),
                k: rng.gen_range(0.0..5.0),
                a: rng.gen_range(-3.0..3.0),
                b: rng.gen_range(0.0..3.0),
            };
            let (t, val) = f.global_min();
            assert_abs_diff_eq!(val, f.value(t), epsilon = 1e-15);
            let sweep = (0..4096)
                .map(|i| f.value(TAU * i as f64 / 4096.0))
                .fold(f64::INFINITY, f64::min);
            // The sweep overestimates the minimum by at most max|g''| (h/2)^2 / 2.
            let half = 0.5 * TAU / 4096.0;
            let slack = 0.5 * (f.ry + 2.0 * f.k) * (f.a.abs() + f.b) * half * half;
            assert!(val <= sweep + 1e-12, "{val} vs {sweep}");
            assert!(val >= sweep - slack - 1e-12, "{val} vs {sweep}");
            assert!(f.derivatives(t).0.abs() <= 1e-8 * (1.0 + f.ry + f.k) * (1.0 + f.a.abs() + f.b));
        }
    }

    #[test]
    fn general_regime_matches_grid_oracle() {
        let (x, val) = qcqp_minimize(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), unit()).unwrap();
        assert!(x.norm() <= 1.0 + 1e-12);
        let oracle = disk_oracle(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), unit());
        assert!(val <= oracle + 1e-12 && val >= oracle - 1e-6, "{val} vs {oracle}");
    }

    #[test]
    fn every_regime_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..200 {
            let b = InputBounds {
                rx: rng.gen_range(0.5..2.0),
                ry: rng.gen_range(0.5..2.0),
            };
            let p = v(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            let w = match i % 5 {
                0 => v(&[0.0, 0.0]),
                1 => rng.gen_range(0.1..3.0) * &p,
                2 => -rng.gen_range(0.01..0.99) * b.switching_radius() / p.norm() * &p,
                3 => -rng.gen_range(1.01..4.0) * b.switching_radius() / p.norm() * &p,
                _ => v(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]),
            };
            let (x, val) = qcqp_minimize(&w, &p, b).unwrap();
            assert!(x.norm() <= b.rx + 1e-9);
            assert_abs_diff_eq!(val, qcqp_objective(&w, &p, &x, b.ry), epsilon = 1e-12);
            let oracle = disk_oracle(&w, &p, b);
            assert!(
                val <= oracle + 1e-9 && val >= oracle - 1e-6 * oracle.abs().max(1.0),
                "case {i}: {val} vs {oracle}"
            );
        }
    }

    #[test]
    fn minimizer_confined_to_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=10 {
            for _ in 0..20 {
                let w = Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
                let p = Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
                let (x, _) = qcqp_minimize(&w, &p, unit()).unwrap();
                let wh = w.normalize();
                let u = (&p - wh.dot(&p) * &wh).normalize();
                let out = &x - wh.dot(&x) * &wh - u.dot(&x) * &u;
                assert!(out.norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn costate_scale_examples() {
        let p = costate_scale(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), unit()).unwrap();
        assert_abs_diff_eq!(p, v(&[1.0, 0.0]), epsilon = 1e-15);

        let w = v(&[1.0, 0.0]);
        let p = costate_scale(&w, &v(&[0.0, 1.0]), unit()).unwrap();
        let (_, val) = qcqp_minimize(&w, &p, unit()).unwrap();
        assert_abs_diff_eq!(val, -1.0, epsilon = 1e-10);
        let (_, doubled) = qcqp_minimize(&w, &(2.0 * &p), unit()).unwrap();
        assert_abs_diff_eq!(doubled, -2.0, epsilon = 1e-10);
        // The scale agrees with a grid minimum of the unit-direction objective.
        let m = disk_oracle(&w, &v(&[0.0, 1.0]), unit());
        assert_abs_diff_eq!(p.norm(), -1.0 / m, epsilon = 1e-5);
    }

    #[test]
    fn inside_regime_scale_from_normalization() {
        // With w = -a p the normalization forces a = rx |w| (ry - rx |w|).
        let b = InputBounds { rx: 1.5, ry: 2.0 };
        let w = v(&[0.4, 0.0]);
        let p = costate_scale(&w, &v(&[-1.0, 0.0]), b).unwrap();
        let wn = 0.4;
        assert_abs_diff_eq!(wn / p.norm(), b.rx * wn * (b.ry - b.rx * wn), epsilon = 1e-12);
    }

    #[test]
    fn regime4_time_examples() {
        let w = v(&[0.5, 0.0]);
        assert_eq!(regime4_time_to_target(&w, &v(&[0.0, 0.5]), 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(regime4_time_to_target(&w, &v(&[0.0, 1.0]), 1.0).unwrap(), 1.5);
        assert!(regime4_time_to_target(&v(&[2.0, 0.0]), &w, 1.0).is_err());
    }

    #[test]
    fn regime4_time_matches_integration() {
        // d|w|/dt along the radial outside-regime input is ry^2 / (4 |w|).
        let ry = 1.0;
        let rhs = |r: f64| ry * ry / (4.0 * r);
        let (mut r, mut t, dt) = (0.5, 0.0, 1e-4);
        while r < 1.0 {
            let k1 = rhs(r);
            let k2 = rhs(r + 0.5 * dt * k1);
            let k3 = rhs(r + 0.5 * dt * k2);
            let k4 = rhs(r + dt * k3);
            let next = r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if next >= 1.0 {
                t += dt * (1.0 - r) / (next - r);
                r = 1.0;
            } else {
                r = next;
                t += dt;
            }
        }
        assert_abs_diff_eq!(t, 1.5, epsilon = 1e-4);
    }

    #[test]
    fn max_curvature_examples() {
        let x = regime4_max_curvature_control(&v(&[1.0, 0.0]), &v(&[0.0, 2.0]), unit()).unwrap();
        assert_abs_diff_eq!(x, v(&[0.5, 0.75f64.sqrt()]), epsilon = 1e-15);

        let x = regime4_max_curvature_control(&v(&[0.5, 0.0]), &v(&[0.0, 2.0]), unit()).unwrap();
        assert_abs_diff_eq!(x, v(&[1.0, 0.0]), epsilon = 1e-15);

        assert!(regime4_max_curvature_control(&v(&[0.3, 0.0]), &v(&[0.0, 2.0]), unit()).is_err());
        assert!(regime4_max_curvature_control(&v(&[1.0, 0.0]), &v(&[2.0, 0.0]), unit()).is_err());
    }

    #[test]
    fn max_curvature_angular_rate() {
        // Integrate w' = (ry - w.x) x with the max-curvature input and compare the
        // finite-differenced polar angle rate with (ry/2) sqrt(rx^2 - (ry/2r)^2) / r.
        let b = InputBounds { rx: 1.0, ry: 1.2 };
        let target = v(&[-3.0, 3.0]);
        let mut w = v(&[1.0, 0.0]);
        let dt = 1e-4;
        for _ in 0..200 {
            let angle0 = w[1].atan2(w[0]);
            let x = regime4_max_curvature_control(&w, &target, b).unwrap();
            assert_abs_diff_eq!(w.dot(&x), b.ry / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(x.norm(), b.rx, epsilon = 1e-12);
            let r = w.norm();
            let expected = 0.5 * b.ry * (b.rx * b.rx - (b.ry / (2.0 * r)).powi(2)).sqrt() / r;
            w = &w + dt * (b.ry - w.dot(&x)) * &x;
            let rate = (w[1].atan2(w[0]) - angle0) / dt;
            assert_abs_diff_eq!(rate, expected, epsilon = 1e-3);
        }
    }

    #[test]
    fn transition_graph() {
        use Regime::*;
        assert!(PositiveAligned.can_transition_to(Origin));
        assert!(Origin.can_transition_to(NegAlignedInside));
        assert!(NegAlignedInside.can_transition_to(NegAlignedOutside));
        assert!(NegAlignedOutside.can_transition_to(NegAlignedOutside));
        assert!(General.can_transition_to(General));
        assert!(!NegAlignedOutside.can_transition_to(NegAlignedInside));
        assert!(!General.can_transition_to(Origin));
        assert!(!PositiveAligned.can_transition_to(General));
        for r in [Origin, PositiveAligned, NegAlignedInside, NegAlignedOutside, General] {
            assert_eq!(Regime::from_label(r.label()), Some(r));
        }
    }

    proptest! {
        #[test]
        fn value_scales_linearly(
            w in prop::array::uniform2(-2.0f64..2.0),
            p in prop::array::uniform2(-2.0f64..2.0),
            sigma in 0.1f64..10.0,
        ) {
            let (w, p) = (v(&w), v(&p));
            prop_assume!(p.norm() > 1e-3);
            let (x1, v1) = qcqp_minimize(&w, &p, unit()).unwrap();
            let (x2, v2) = qcqp_minimize(&w, &(sigma * &p), unit()).unwrap();
            prop_assert!((v2 - sigma * v1).abs() <= 1e-9 * (1.0 + v2.abs()));
            // Both minimizers attain the same unscaled value.
            prop_assert!((qcqp_objective(&w, &p, &x2, 1.0) - qcqp_objective(&w, &p, &x1, 1.0)).abs() <= 1e-9);
        }

        #[test]
        fn costate_scale_normalizes(
            w in prop::array::uniform3(-2.0f64..2.0),
            p in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let (w, p) = (v(&w), v(&p));
            prop_assume!(p.norm() > 1e-3);
            let b = InputBounds { rx: 1.3, ry: 0.7 };
            let scaled = costate_scale(&w, &p, b).unwrap();
            let point = pmp_point(&w, &scaled, b).unwrap();
            prop_assert!((point.value + 1.0).abs() <= 1e-10);
            prop_assert!(hamiltonian(&w, &scaled, &point.x, b.ry).unwrap().abs() <= 1e-10);
        }
    }
}
