//! Time-optimal and heuristic teaching sequences for a gradient-descent
//! least-squares learner.
//!
//! The learner update is `w <- w - eta * (w.x - y) * x` with inputs restricted
//! to `|x| <= rx`, `|y| <= ry`. A teacher picks the inputs; the goal is to move
//! the learner from `w0` to `w_star` in as few updates (or as little
//! continuous time) as possible.
//!
//! Modules:
//! - [`problem`]: instance definition, the update map, input rescaling, one-step reachability
//! - [`heuristics`]: GREEDY and STRAIGHT teachers and the teacher loop
//! - [`pmp`]: pointwise Pontryagin machinery (Hamiltonian, QCQP, regimes)
//! - [`shooting`]: state/co-state integration and co-state shooting
//! - [`optsolve`]: projected-gradient and augmented-Lagrangian solvers
//! - [`teachers_opt`]: discrete minimum-step (NLP) and continuous minimum-time (CNLP) teachers
//! - [`subspace`]: reduction of an n-dimensional instance to the plane of `w0` and `w_star`
//! - [`cli`]: the `teachctl` command line

pub mod cli;
pub mod error;
pub mod heuristics;
pub mod optsolve;
pub mod pmp;
pub mod problem;
pub mod shooting;
pub mod subspace;
pub mod teachers_opt;

pub use error::{Error, Result};
pub use problem::{ProblemSpec, TeachingInput, Trajectory};

/// Dense real vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
