//! Crate-wide error type.

use thiserror::Error;

/// Why the constraint root-find could not bracket a root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleKind {
    /// min u⁺ stays negative even at the largest admissible multiplier:
    /// growth is too strong for any burden in the bracket to cancel.
    GrowthTooStrong,
    /// min u⁺ is already positive at the smallest admissible multiplier:
    /// decay is too strong at the lower end (usually I = 0).
    DecayTooStrong,
}

impl std::fmt::Display for InfeasibleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleKind::GrowthTooStrong => {
                write!(f, "min u+ < 0 at the largest multiplier (growth too strong)")
            }
            InfeasibleKind::DecayTooStrong => {
                write!(f, "min u+ > 0 at the smallest multiplier (decay too strong)")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{quantity} = {value} outside the model validity box [{lo}, {hi}]")]
    OutOfBox {
        quantity: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("position {x} outside grid bounds [{lo}, {hi}] on axis {axis}")]
    OutOfDomain { x: f64, lo: f64, hi: f64, axis: usize },

    #[error(
        "initial data not coercive: ring minimum {value} at radius {radius} stopped growing"
    )]
    NotCoercive { radius: f64, value: f64 },

    #[error(
        "input not convex at samples {i0},{i1},{i2} (values {f0}, {f1}, {f2}): \
         second difference {second_diff} below -{tol}"
    )]
    NonConvex {
        i0: usize,
        i1: usize,
        i2: usize,
        f0: f64,
        f1: f64,
        f2: f64,
        second_diff: f64,
        tol: f64,
    },

    #[error("no non-negative multiplier achieves the constraint at t = {time}: {kind}")]
    Infeasible { time: f64, kind: InfeasibleKind },

    #[error("dt = {dt} violates the stability limit {limit} at t = {time}")]
    StepSize { dt: f64, limit: f64, time: f64 },

    #[error("numerical blow-up at node {node} (x = {x}) at t = {time}")]
    BlowUp { node: usize, x: f64, time: f64 },

    #[error(
        "field argmin at node {node} is {cells} cells from the boundary (need >= {required}) \
         at t = {time}; enlarge the domain"
    )]
    ArgminNearBoundary {
        node: usize,
        cells: usize,
        required: usize,
        time: f64,
    },

    #[error("domain too small: no feasible velocity at node {node} (x = {x})")]
    EmptyVelocitySet { node: usize, x: f64 },

    #[error("run has no stored argmin maps; trajectory backtracking needs a semi-Lagrangian run")]
    UnsupportedRun,

    #[error("runs are not comparable: {0}")]
    ScenarioMismatch(String),

    #[error("model invalid: {0}")]
    ModelInvalid(String),

    #[error("assumption gate failed: {0}")]
    AssumptionGate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
