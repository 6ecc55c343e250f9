//! Solvers for the constrained Hamilton-Jacobi problem: find a pair (u, I)
//! with u_t + H(I(t), x, u_x) = 0 and min_x u(t, .) = 0, where the scalar
//! burden I(t) is an unknown Lagrange multiplier attached to the constraint.
//!
//! Three mutually cross-validating routes are provided:
//!
//! * `fd`  — monotone finite differences (Lax-Friedrichs or convex upwind),
//! * `sl`  — semi-Lagrangian dynamic programming on the Hopf-Lax form, with
//!           trajectory backtracking,
//! * `eps` — the regularized population model in Hopf-Cole variables, where
//!           the constraint emerges instead of being imposed,
//!
//! plus diagnostics that exercise the structural properties the solution is
//! supposed to satisfy (burden monotonicity, cross-route agreement, bounded
//! variation of trajectory velocities, lower bounds).
//!
//! Everything is generic over the scalar type via [`real::Real`]; the
//! concrete aliases below fix f64 for the CLI and the acceptance suite.

pub mod diagnostics;
pub mod eps;
pub mod error;
pub mod fd;
pub mod grid;
pub mod model;
pub mod multiplier;
pub mod real;
pub mod runner;
pub mod scenario;
pub mod sl;

pub use error::{Error, Result};
pub use real::{real, Real};

/// Default scalar type for executables and acceptance tests.
pub type Scalar = f64;

pub type Model = model::ModelSpec<Scalar>;
pub type Grid = grid::GridSpec<Scalar>;
pub type FieldF = grid::Field<Scalar>;
pub type Run = multiplier::RunResult<Scalar>;
pub type Path = multiplier::MultiplierPath<Scalar>;
