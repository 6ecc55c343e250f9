//! The constraint engine: given a one-step evolution operator u -> u+(I)
//! that is strictly increasing in the burden I, find the unique I enforcing
//! min u+ = 0 at every step. Also owns the outer time loop shared by the
//! finite-difference and semi-Lagrangian routes.

use serde::Serialize;

use crate::error::{Error, InfeasibleKind, Result};
use crate::grid::{Field, GridSpec, TruncationInfo};
use crate::real::{as_f64, real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Fd,
    Sl,
    Eps,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Route::Fd => write!(f, "fd"),
            Route::Sl => write!(f, "sl"),
            Route::Eps => write!(f, "eps"),
        }
    }
}

/// Per-node velocity choices of one accepted semi-Lagrangian step.
/// `lattice_v` is the exact discrete argmin used for the field update;
/// `refined_v` is the sub-lattice vertex used for trajectory work.
#[derive(Debug, Clone)]
pub struct ArgminChoices<T> {
    pub lattice_v: Vec<T>,
    pub refined_v: Vec<T>,
    /// Nodes whose argmin hit the edge of the velocity search radius.
    pub saturated: usize,
}

/// Result of one stepper evaluation at a candidate multiplier.
#[derive(Debug, Clone)]
pub struct StepOutcome<T: Real> {
    pub field: Field<T>,
    pub choices: Option<ArgminChoices<T>>,
}

/// A one-step evolution operator parameterized by the multiplier. The
/// discrete monotonicity requirement is: raising I never lowers any nodal
/// value of the output (strictly raises the minimum).
pub trait Stepper<T: Real>: Sync {
    fn step(&self, u: &Field<T>, i: T, dt: T) -> Result<StepOutcome<T>>;
    /// Stable step size from the current field (CFL for explicit schemes,
    /// the configured value for unconditionally stable ones).
    fn dt_hint(&self, u: &Field<T>, i: T) -> Result<T>;
    fn route(&self) -> Route;
}

/// Wrapper exploiting linear multiplier dependence: when the wrapped model
/// has constant dL/dI = q, the stepper output at any I is the output at a
/// base multiplier shifted by dt q (I - I0), so the root-find needs only one
/// real evaluation per (field, dt) pair. Velocity choices are I-independent
/// in that case and shared. For models without the property the wrapper is
/// a transparent pass-through.
pub struct LinearitySped<'s, T: Real, S: Stepper<T>> {
    inner: &'s S,
    q: Option<T>,
    i_base: T,
    cache: std::sync::Mutex<Option<(u64, u64, StepOutcome<T>)>>,
}

impl<'s, T: Real, S: Stepper<T>> LinearitySped<'s, T, S> {
    pub fn new(inner: &'s S, q: Option<T>, i_base: T) -> Self {
        LinearitySped {
            inner,
            q,
            i_base,
            cache: std::sync::Mutex::new(None),
        }
    }
}

impl<T: Real, S: Stepper<T>> Stepper<T> for LinearitySped<'_, T, S> {
    fn step(&self, u: &Field<T>, i: T, dt: T) -> Result<StepOutcome<T>> {
        let q = match self.q {
            Some(q) => q,
            None => return self.inner.step(u, i, dt),
        };
        let key = (as_f64(u.time).to_bits(), as_f64(dt).to_bits());
        let mut guard = self.cache.lock().expect("cache lock");
        let base = match guard.as_ref() {
            Some((kt, kd, out)) if (*kt, *kd) == key => out.clone(),
            _ => {
                let out = self.inner.step(u, self.i_base, dt)?;
                *guard = Some((key.0, key.1, out.clone()));
                out
            }
        };
        drop(guard);
        let shift = dt * q * (i - self.i_base);
        let mut field = base.field;
        for v in field.values.iter_mut() {
            *v = *v + shift;
        }
        Ok(StepOutcome {
            field,
            choices: base.choices,
        })
    }

    fn dt_hint(&self, u: &Field<T>, i: T) -> Result<T> {
        self.inner.dt_hint(u, i)
    }

    fn route(&self) -> Route {
        self.inner.route()
    }
}

/// Root-find configuration for the constraint solve.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintSolve<T: Real> {
    /// Default bracket [I_min, I_max]; the lower end is a hard clamp.
    pub bracket: (T, T),
    /// |min u+| accepted as satisfying the constraint.
    pub tol_constraint: T,
    /// Bisection terminates at this bracket width, then one secant polish.
    pub bracket_width: T,
    /// Geometric expansions of the upper end before declaring infeasibility.
    pub expand_cap: usize,
    /// Minimum distance (in cells) of the field argmin from the boundary.
    pub boundary_margin: usize,
}

impl<T: Real> Default for ConstraintSolve<T> {
    fn default() -> Self {
        ConstraintSolve {
            bracket: (T::zero(), real(10.0)),
            tol_constraint: real(1e-8),
            bracket_width: bracket_width_default(),
            expand_cap: 6,
            boundary_margin: 5,
        }
    }
}

/// 1e-10 where representable, else a few hundred epsilons.
pub fn bracket_width_default<T: Real>() -> T {
    real::<T>(1e-10).max(T::epsilon() * real(256.0))
}

/// Everything recorded about one accepted step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepRecord<T: Real> {
    pub t_start: T,
    pub t_end: T,
    pub i: T,
    pub min_before: T,
    pub min_after: T,
    pub argmin_x: T,
    pub argmin_node: usize,
    pub bracket_lo: T,
    pub bracket_hi: T,
    pub iterations: usize,
}

/// The multiplier path as a right-continuous step function: value k holds on
/// the interval (t_bounds[k], t_bounds[k+1]]. No value is claimed at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierPath<T: Real> {
    pub t_bounds: Vec<T>,
    pub values: Vec<T>,
    pub residuals: Vec<T>,
    pub iterations: Vec<usize>,
}

impl<T: Real> MultiplierPath<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn midpoints(&self) -> Vec<T> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, _)| (self.t_bounds[k] + self.t_bounds[k + 1]) / real(2.0))
            .collect()
    }

    /// Right-continuous lookup: the value on (t_bounds[k], t_bounds[k+1]].
    pub fn value_at(&self, t: T) -> T {
        if self.values.is_empty() {
            return T::nan();
        }
        let mut k = 0;
        while k + 1 < self.values.len() && t > self.t_bounds[k + 1] {
            k += 1;
        }
        self.values[k]
    }

    /// Total variation of the step function.
    pub fn bv(&self) -> T {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(T::zero(), |a, b| a + b)
    }

    /// Total variation restricted to (0, t].
    pub fn bv_up_to(&self, t: T) -> T {
        let mut acc = T::zero();
        for k in 1..self.values.len() {
            if self.t_bounds[k] > t {
                break;
            }
            acc = acc + (self.values[k] - self.values[k - 1]).abs();
        }
        acc
    }

    /// L1 distance to another path over [from, to], both read as
    /// right-continuous step functions.
    pub fn l1_distance(&self, other: &Self, from: T, to: T) -> T {
        let mut cuts: Vec<T> = self
            .t_bounds
            .iter()
            .chain(other.t_bounds.iter())
            .copied()
            .filter(|&t| t > from && t < to)
            .collect();
        cuts.push(from);
        cuts.push(to);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon() * real(16.0));
        let mut acc = T::zero();
        for w in cuts.windows(2) {
            let mid = (w[0] + w[1]) / real(2.0);
            acc = acc + (self.value_at(mid) - other.value_at(mid)).abs() * (w[1] - w[0]);
        }
        acc
    }

    /// Steps whose increment exceeds max(10 x median |increment|, floor).
    /// Returns (time of the step boundary, increment). Raw per-step form;
    /// prefer [`MultiplierPath::jump_events`], which is robust to staircase
    /// quantization from argmin node-hopping.
    pub fn jumps(&self, floor: T) -> Vec<(T, T)> {
        if self.values.len() < 2 {
            return Vec::new();
        }
        let mut mags: Vec<T> = self
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = mags[mags.len() / 2];
        let threshold = (median * real(10.0)).max(floor);
        self.values
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[1] - w[0]).abs() > threshold)
            .map(|(k, w)| (self.t_bounds[k + 1], w[1] - w[0]))
            .collect()
    }

    /// Default aggregation window for jump detection: a few steps wide, so
    /// grid-induced staircase increments average out.
    pub fn default_jump_window(&self) -> T {
        let span = *self.t_bounds.last().unwrap_or(&T::zero());
        let max_step = self
            .t_bounds
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), |a, b| a.max(b));
        (max_step * real(4.0))
            .max(span / real(200.0))
            .min(span / real(20.0))
    }

    /// Jump detection on a coarse resampled grid: increments over windows of
    /// length `window` are compared against max(10 x their median, floor);
    /// adjacent flagged windows merge into one event whose time is then
    /// refined to the original step boundary with the largest raw increment.
    /// Returns (refined time, total increment) per event.
    pub fn jump_events(&self, window: T, floor: T) -> Vec<(T, T)> {
        if self.values.len() < 2 {
            return Vec::new();
        }
        let span = *self.t_bounds.last().unwrap();
        let m = as_f64((span / window).ceil()).max(1.0) as usize;
        let coarse: Vec<T> = (0..=m)
            .map(|k| {
                let t = span * real(k as f64 / m as f64);
                self.value_at(t)
            })
            .collect();
        let mut mags: Vec<T> = coarse.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let increments = mags.clone();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = mags[mags.len() / 2];
        // The median degenerates to zero on staircase paths (argmin parked
        // between node hops), so the mean increment backs it up.
        let mean = increments.iter().fold(T::zero(), |a, &b| a + b)
            / real(increments.len() as f64);
        let threshold = (median * real(10.0)).max(mean * real(10.0)).max(floor);

        let mut events = Vec::new();
        let mut k = 0usize;
        while k < increments.len() {
            if increments[k] <= threshold {
                k += 1;
                continue;
            }
            let start = k;
            while k < increments.len() && increments[k] > threshold {
                k += 1;
            }
            let t_lo = span * real(start as f64 / m as f64) - window;
            let t_hi = span * real(k as f64 / m as f64) + window;
            let delta = coarse[k] - coarse[start];
            // Refine the event time to the raw step with the largest jump.
            let mut best_t = span * real((start + k) as f64 / (2 * m) as f64);
            let mut best_mag = T::zero();
            for j in 1..self.values.len() {
                let t = self.t_bounds[j];
                if t >= t_lo && t <= t_hi {
                    let mag = (self.values[j] - self.values[j - 1]).abs();
                    if mag > best_mag {
                        best_mag = mag;
                        best_t = t;
                    }
                }
            }
            events.push((best_t, delta));
        }
        events
    }
}

/// An accepted constraint-satisfying step.
#[derive(Debug)]
pub struct AcceptedStep<T: Real> {
    pub i: T,
    pub outcome: StepOutcome<T>,
    pub record: StepRecord<T>,
}

/// Finds the unique multiplier with min u+(I) = 0 by bracketed bisection
/// followed by one secant polish, then re-applies the stepper at the root.
///
/// The bracket must produce min u+ of opposite signs; if min u+(I_max) < 0
/// the upper end is expanded geometrically up to the cap (the lower end is
/// clamped, matching the non-negativity convention for the burden).
pub fn solve_multiplier_step<T: Real, S: Stepper<T> + ?Sized>(
    stepper: &S,
    u: &Field<T>,
    dt: T,
    solve: &ConstraintSolve<T>,
) -> Result<AcceptedStep<T>> {
    let time = as_f64(u.time);
    let eval = |i: T| -> Result<(T, StepOutcome<T>)> {
        let out = stepper.step(u, i, dt)?;
        out.field.assert_finite(u.time)?;
        Ok((out.field.min(), out))
    };

    let (mut lo, mut hi) = solve.bracket;
    let (mut f_lo, _) = eval(lo)?;
    let mut evals = 1usize;
    if f_lo > solve.tol_constraint {
        return Err(Error::Infeasible {
            time,
            kind: InfeasibleKind::DecayTooStrong,
        });
    }
    let (mut f_hi, _) = eval(hi)?;
    evals += 1;
    if f_hi < -solve.tol_constraint {
        let width = hi - lo;
        let mut expanded = false;
        for k in 0..solve.expand_cap {
            hi = hi + width * real(2.0f64.powi(k as i32));
            let (f, _) = eval(hi)?;
            evals += 1;
            if f >= -solve.tol_constraint {
                f_hi = f;
                expanded = true;
                break;
            }
            f_hi = f;
        }
        if !expanded {
            return Err(Error::Infeasible {
                time,
                kind: InfeasibleKind::GrowthTooStrong,
            });
        }
    }

    while hi - lo > solve.bracket_width {
        let mid = (lo + hi) / real(2.0);
        if mid <= lo || mid >= hi {
            break; // bracket at floating-point resolution
        }
        let (f_mid, _) = eval(mid)?;
        evals += 1;
        if f_mid < T::zero() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }

    // One secant polish inside the final bracket.
    let denom = f_hi - f_lo;
    let i_star = if denom > T::zero() {
        (hi - f_hi * (hi - lo) / denom).max(lo).min(hi)
    } else {
        (lo + hi) / real(2.0)
    };
    let (min_after, outcome) = eval(i_star)?;
    evals += 1;

    if min_after.abs() > solve.tol_constraint {
        return Err(Error::Infeasible {
            time,
            kind: if min_after > T::zero() {
                InfeasibleKind::DecayTooStrong
            } else {
                InfeasibleKind::GrowthTooStrong
            },
        });
    }

    let (_, argmin_node) = outcome.field.min_with_index();
    let grid = &outcome.field.grid;
    let cells = grid.cells_to_boundary(argmin_node);
    if cells < solve.boundary_margin {
        return Err(Error::ArgminNearBoundary {
            node: argmin_node,
            cells,
            required: solve.boundary_margin,
            time,
        });
    }

    let record = StepRecord {
        t_start: u.time,
        t_end: u.time + dt,
        i: i_star,
        min_before: u.min(),
        min_after,
        argmin_x: grid.position(argmin_node)[0],
        argmin_node,
        bracket_lo: lo,
        bracket_hi: hi,
        iterations: evals,
    };

    Ok(AcceptedStep {
        i: i_star,
        outcome,
        record,
    })
}

/// Inputs of a full time integration.
#[derive(Debug, Clone)]
pub struct RunParams<T: Real> {
    pub scenario: String,
    pub initial: Field<T>,
    pub horizon: T,
    pub snapshot_times: Vec<T>,
    pub solve: ConstraintSolve<T>,
    /// Keep the field at every step (needed for trajectory backtracking).
    pub keep_fields: bool,
}

/// Output of one route on one scenario.
#[derive(Debug, Clone)]
pub struct RunResult<T: Real> {
    pub route: Route,
    pub scenario: String,
    pub grid: GridSpec<T>,
    pub horizon: T,
    pub path: MultiplierPath<T>,
    pub records: Vec<StepRecord<T>>,
    pub snapshots: Vec<Field<T>>,
    /// Field at every accepted step (index k = state at t_bounds[k]).
    pub fields: Option<Vec<Field<T>>>,
    /// Per-step velocity choices (semi-Lagrangian runs only).
    pub choices: Option<Vec<ArgminChoices<T>>>,
    pub truncation: Option<TruncationInfo<T>>,
    pub saturated_steps: usize,
    /// Constraint tolerance and bracket width the run used, for downstream
    /// pass/fail thresholds.
    pub tol_constraint: T,
    pub bracket_width: T,
}

impl<T: Real> RunResult<T> {
    /// Snapshot whose time is nearest to `t`.
    pub fn snapshot_at(&self, t: T) -> &Field<T> {
        self.snapshots
            .iter()
            .min_by(|a, b| {
                (a.time - t)
                    .abs()
                    .partial_cmp(&(b.time - t).abs())
                    .unwrap()
            })
            .expect("runs always hold at least the initial snapshot")
    }

    /// Floor below which path increments are treated as root-find noise
    /// rather than jumps.
    pub fn jump_floor(&self) -> T {
        (self.tol_constraint + self.bracket_width) * real(100.0)
    }
}

/// The outer time loop: repeatedly solves the constraint and advances.
/// Strictly sequential; each step depends on the previous field.
pub fn run<T: Real, S: Stepper<T> + ?Sized>(
    params: &RunParams<T>,
    stepper: &S,
) -> Result<RunResult<T>> {
    let grid = params.initial.grid.clone();
    let min0 = params.initial.min();
    if min0.abs() > real(1e-6) {
        return Err(Error::Config(format!(
            "initial field must satisfy min g = 0 on the grid (got {})",
            as_f64(min0)
        )));
    }

    let horizon = params.horizon;
    let mut events: Vec<T> = params
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t <= horizon)
        .collect();
    events.push(horizon);
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup_by(|a, b| (*a - *b).abs() <= horizon * real(1e-12));

    let mut u = params.initial.clone();
    u.time = T::zero();
    let mut snapshots = vec![u.clone()];
    let mut fields = if params.keep_fields { Some(vec![u.clone()]) } else { None };
    let mut choices: Option<Vec<ArgminChoices<T>>> = if params.keep_fields {
        Some(Vec::new())
    } else {
        None
    };

    let mut path = MultiplierPath {
        t_bounds: vec![T::zero()],
        values: Vec::new(),
        residuals: Vec::new(),
        iterations: Vec::new(),
    };
    let mut records = Vec::new();
    let mut saturated_steps = 0usize;

    let mut i_prev = (params.solve.bracket.0 + params.solve.bracket.1) / real(2.0);
    let dt_floor: T = real(1e-6);
    let snap_tol = horizon * real(1e-10) + real(1e-14);

    let mut event_idx = 0usize;
    let mut t = T::zero();
    while event_idx < events.len() {
        let target = events[event_idx];
        if target - t <= snap_tol {
            if snapshots.last().map(|s| (s.time - target).abs() > snap_tol) != Some(false) {
                let mut snap = u.clone();
                snap.time = target;
                snapshots.push(snap);
            }
            event_idx += 1;
            continue;
        }

        let hint = stepper.dt_hint(&u, i_prev)?.max(dt_floor);
        let dt = hint.min(target - t);

        let accepted = solve_multiplier_step(stepper, &u, dt, &params.solve)?;
        t = t + dt;
        u = accepted.outcome.field;
        u.time = t;

        path.t_bounds.push(t);
        path.values.push(accepted.i);
        path.residuals.push(accepted.record.min_after);
        path.iterations.push(accepted.record.iterations);
        records.push(accepted.record);
        i_prev = accepted.i;

        if let Some(ch) = accepted.outcome.choices {
            if ch.saturated > 0 {
                saturated_steps += 1;
            }
            if let Some(list) = choices.as_mut() {
                list.push(ch);
            }
        }
        if let Some(fs) = fields.as_mut() {
            fs.push(u.clone());
        }
    }

    Ok(RunResult {
        route: stepper.route(),
        scenario: params.scenario.clone(),
        grid,
        horizon,
        path,
        records,
        snapshots,
        fields,
        choices,
        truncation: None,
        saturated_steps,
        tol_constraint: params.solve.tol_constraint,
        bracket_width: params.solve.bracket_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_abs_diff_eq;

    /// Toy operator: u+ = u + dt (I - r(x)), strictly increasing in I.
    struct ToyStepper {
        rate: fn(f64) -> f64,
    }

    impl Stepper<f64> for ToyStepper {
        fn step(&self, u: &Field<f64>, i: f64, dt: f64) -> Result<StepOutcome<f64>> {
            let mut field = u.clone();
            for (k, v) in field.values.iter_mut().enumerate() {
                let x = u.grid.position(k)[0];
                *v = *v + dt * (i - (self.rate)(x));
            }
            field.time = u.time + dt;
            Ok(StepOutcome { field, choices: None })
        }
        fn dt_hint(&self, _u: &Field<f64>, _i: f64) -> Result<f64> {
            Ok(0.01)
        }
        fn route(&self) -> Route {
            Route::Fd
        }
    }

    /// Degenerate operator, constant in I.
    struct FlatStepper;
    impl Stepper<f64> for FlatStepper {
        fn step(&self, u: &Field<f64>, _i: f64, dt: f64) -> Result<StepOutcome<f64>> {
            let mut field = u.clone();
            for v in field.values.iter_mut() {
                *v = *v - dt; // drifts down regardless of I
            }
            Ok(StepOutcome { field, choices: None })
        }
        fn dt_hint(&self, _u: &Field<f64>, _i: f64) -> Result<f64> {
            Ok(0.01)
        }
        fn route(&self) -> Route {
            Route::Fd
        }
    }

    fn parabola_field(n: usize) -> Field<f64> {
        let grid = GridSpec::new_1d(-2.0, 2.0, n).unwrap();
        Field::from_fn(&grid, 0.0, |x| x[0] * x[0])
    }

    fn solve_cfg() -> ConstraintSolve<f64> {
        ConstraintSolve::default()
    }

    #[test]
    fn recovers_the_rate_at_the_argmin() {
        // With u+ = u + dt (I - r(x)) and argmin of u at x = 0, the
        // constraint forces I = r(0) up to the root-find tolerance.
        let stepper = ToyStepper {
            rate: |x| 1.0 + x * x,
        };
        let u = parabola_field(128);
        let acc = solve_multiplier_step(&stepper, &u, 0.01, &solve_cfg()).unwrap();
        assert_abs_diff_eq!(acc.i, 1.0, epsilon = 1e-6);
        assert!(acc.record.min_after.abs() <= 1e-8);
    }

    #[test]
    fn expands_the_bracket_when_growth_is_strong() {
        let stepper = ToyStepper {
            rate: |x| 25.0 + x * x, // root I = 25 above the default bracket
        };
        let u = parabola_field(128);
        let acc = solve_multiplier_step(&stepper, &u, 0.01, &solve_cfg()).unwrap();
        assert_abs_diff_eq!(acc.i, 25.0, epsilon = 1e-5);
    }

    #[test]
    fn degenerate_stepper_is_an_error_not_a_silent_answer() {
        let u = parabola_field(128);
        match solve_multiplier_step(&FlatStepper, &u, 0.01, &solve_cfg()) {
            Err(Error::Infeasible { kind, .. }) => {
                assert_eq!(kind, InfeasibleKind::GrowthTooStrong)
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn decay_too_strong_is_distinguished() {
        // u+ rises at every I >= 0: min u+(I_min) > 0.
        let stepper = ToyStepper { rate: |_| -5.0 };
        let u = parabola_field(128);
        match solve_multiplier_step(&stepper, &u, 0.01, &solve_cfg()) {
            Err(Error::Infeasible { kind, .. }) => {
                assert_eq!(kind, InfeasibleKind::DecayTooStrong)
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn zero_horizon_returns_only_the_initial_field() {
        let stepper = ToyStepper {
            rate: |x| 1.0 + x * x,
        };
        let params = RunParams {
            scenario: "toy".to_string(),
            initial: parabola_field(128),
            horizon: 0.0,
            snapshot_times: vec![],
            solve: solve_cfg(),
            keep_fields: false,
        };
        let run = run(&params, &stepper).unwrap();
        assert!(run.path.is_empty());
        assert_eq!(run.snapshots.len(), 1);
        assert_eq!(run.snapshots[0].time, 0.0);
    }

    #[test]
    fn identical_configs_give_bit_identical_paths() {
        let stepper = ToyStepper {
            rate: |x| 1.0 + (x - 0.3) * (x - 0.3),
        };
        let params = RunParams {
            scenario: "toy".to_string(),
            initial: parabola_field(128),
            horizon: 0.1,
            snapshot_times: vec![0.05],
            solve: solve_cfg(),
            keep_fields: false,
        };
        let a = run(&params, &stepper).unwrap();
        let b = run(&params, &stepper).unwrap();
        assert_eq!(a.path, b.path);
    }

    #[test]
    fn right_continuous_lookup_and_l1_distance() {
        let p1 = MultiplierPath {
            t_bounds: vec![0.0, 0.5, 1.0],
            values: vec![1.0, 2.0],
            residuals: vec![0.0, 0.0],
            iterations: vec![1, 1],
        };
        let p2 = MultiplierPath {
            t_bounds: vec![0.0, 0.25, 1.0],
            values: vec![1.0, 1.0],
            residuals: vec![0.0, 0.0],
            iterations: vec![1, 1],
        };
        assert_eq!(p1.value_at(0.5), 1.0); // value on (0, 0.5]
        assert_eq!(p1.value_at(0.500001), 2.0);
        assert_abs_diff_eq!(p1.l1_distance(&p2, 0.0, 1.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p1.bv(), 1.0);
    }

    #[test]
    fn jump_detection_uses_the_median_with_a_floor() {
        let values: Vec<f64> = (0..40)
            .map(|k| 1.0 + 0.001 * k as f64 + if k >= 20 { 1.0 } else { 0.0 })
            .collect();
        let t_bounds: Vec<f64> = (0..=40).map(|k| k as f64 * 0.025).collect();
        let n = values.len();
        let path = MultiplierPath {
            t_bounds,
            values,
            residuals: vec![0.0; n],
            iterations: vec![1; n],
        };
        let jumps = path.jumps(1e-6);
        assert_eq!(jumps.len(), 1);
        assert_abs_diff_eq!(jumps[0].0, 0.5, epsilon = 1e-12);
        // A constant path with tiny wobble has no jumps above the floor.
        let wobble: Vec<f64> = (0..40).map(|k| 1.0 + 1e-12 * (k % 2) as f64).collect();
        let path2 = MultiplierPath {
            t_bounds: (0..=40).map(|k| k as f64 * 0.025).collect(),
            values: wobble,
            residuals: vec![0.0; n],
            iterations: vec![1; n],
        };
        assert!(path2.jumps(1e-6).is_empty());
    }
}
