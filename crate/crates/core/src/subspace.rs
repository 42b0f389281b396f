//! Reduction of an n-dimensional teaching instance to the plane containing
//! `w0` and `w_star`.
//!
//! The update `w - eta (w.x - y) x` is a linear combination of `w` and `x`, so
//! a trajectory whose inputs stay in a plane through the origin never leaves
//! it. Optimal teachers solve the reduced 2D instance and lift the result.

use crate::error::{check_dim, Error, Result};
use crate::problem::ProblemSpec;
use crate::Vector;

/// Below this norm a Gram-Schmidt residual is treated as zero.
const DEPENDENT_TOL: f64 = 1e-12;

/// Orthonormal pair `b1, b2` spanning a plane through the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneBasis {
    pub b1: Vector,
    pub b2: Vector,
}

fn orthogonalize(v: &Vector, against: &Vector) -> Vector {
    // Two passes keep the result orthogonal to working precision.
    let once = v - v.dot(against) * against;
    &once - once.dot(against) * against
}

/// Gram-Schmidt on `{w0, w_star}`, completed with the first coordinate axis not
/// parallel to the span when the pair is dependent.
pub fn build_basis(w0: &Vector, w_star: &Vector) -> Result<PlaneBasis> {
    check_dim(w0.len(), w_star.len())?;
    let n = w0.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "a plane basis needs dimension >= 2, got {n}"
        )));
    }
    let scale = w0.norm().max(w_star.norm()).max(1.0);
    let b1 = if w0.norm() > DEPENDENT_TOL * scale {
        w0.normalize()
    } else if w_star.norm() > DEPENDENT_TOL * scale {
        w_star.normalize()
    } else {
        axis(n, 0)
    };
    let rest = orthogonalize(w_star, &b1);
    let b2 = if rest.norm() > DEPENDENT_TOL * scale {
        rest.normalize()
    } else {
        (0..n)
            .map(|i| orthogonalize(&axis(n, i), &b1))
            .find(|r| r.norm() > 1e-6)
            .expect("some coordinate axis leaves a one-dimensional span")
            .normalize()
    };
    Ok(PlaneBasis { b1, b2 })
}

fn axis(n: usize, i: usize) -> Vector {
    let mut e = Vector::zeros(n);
    e[i] = 1.0;
    e
}

impl PlaneBasis {
    pub fn dim(&self) -> usize {
        self.b1.len()
    }

    /// Coordinates `(b1.v, b2.v)`.
    pub fn project(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.dim(), v.len())?;
        Ok(Vector::from_column_slice(&[self.b1.dot(v), self.b2.dot(v)]))
    }

    /// `c1 b1 + c2 b2`.
    pub fn lift(&self, c: &Vector) -> Result<Vector> {
        check_dim(2, c.len())?;
        Ok(c[0] * &self.b1 + c[1] * &self.b2)
    }

    /// The same instance expressed in plane coordinates.
    pub fn project_spec(&self, spec: &ProblemSpec) -> Result<ProblemSpec> {
        Ok(spec.with_endpoints(self.project(&spec.w0)?, self.project(&spec.w_star)?))
    }
}

/// Basis for `spec` and the reduced 2D instance.
pub fn reduce(spec: &ProblemSpec) -> Result<(PlaneBasis, ProblemSpec)> {
    let basis = build_basis(&spec.w0, &spec.w_star)?;
    let reduced = basis.project_spec(spec)?;
    Ok((basis, reduced))
}
