//! Semi-Lagrangian dynamic programming for the variational (Hopf-Lax) form:
//! one step computes u+(x) = min_v [ dt L(I, x - dt v, v) + u(x - dt v) ]
//! over a finite velocity lattice, with feet evaluated by linear
//! interpolation. Also: trajectory backtracking, Euler-Lagrange residuals,
//! and BV seminorms of trajectory velocities.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{interpolate, Field, GridSpec};
use crate::model::ModelSpec;
use crate::multiplier::{
    self, ArgminChoices, MultiplierPath, Route, RunParams, RunResult, StepOutcome, Stepper,
};
use crate::real::{as_f64, real, Real};

/// Uniform symmetric velocity lattice {k dv : |k| <= half_count}, aligned so
/// feet land on an integer refinement of the grid (dv = h / (m dt)) whenever
/// the point cap allows it.
#[derive(Debug, Clone, Copy)]
pub struct VelocityLattice<T: Real> {
    pub dv: T,
    pub half_count: usize,
    /// Radius the search actually uses.
    pub v_max: T,
    /// Radius implied by the super-linearity data (diagnostic; the used
    /// radius never exceeds it).
    pub v_theory: T,
}

impl<T: Real> VelocityLattice<T> {
    pub fn count(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn velocity(&self, k: isize) -> T {
        self.dv * real(k as f64)
    }
}

pub const LATTICE_CAP: usize = 513;

/// Radius where Theta(r) - C_Theta first dominates 2 (lip_g + sup|L0|)(1+r),
/// doubled. This mirrors the compactness argument bounding optimal-curve
/// speeds, and is reported with every lattice.
fn theory_radius<T: Real>(model: &ModelSpec<T>, grid: &GridSpec<T>, lip_g: T) -> T {
    let (a, b) = grid.bounds(0);
    let sup_l0 = model.sup_abs_resting_cost(a, b);
    let slope = real::<T>(2.0) * (lip_g + sup_l0);
    let ok = |r: T| model.theta(r) - model.c_theta() >= slope * (T::one() + r);
    let mut hi = T::one();
    let mut tries = 0;
    while !ok(hi) && tries < 64 {
        hi = hi * real(2.0);
        tries += 1;
    }
    if tries == 64 {
        return T::infinity();
    }
    let mut lo = hi / real(2.0);
    for _ in 0..48 {
        let mid = (lo + hi) / real(2.0);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi * real(2.0)
}

/// Largest |dH/dp| over the box with momenta up to 1.1 x the initial
/// Lipschitz constant; optimal-curve velocities live in this range.
fn practical_radius<T: Real>(model: &ModelSpec<T>, grid: &GridSpec<T>, lip_g: T) -> Result<T> {
    let vb = model.validity();
    let p_reach = (lip_g * real(1.1)).min(vb.pv_radius);
    let (a, b) = grid.bounds(0);
    let mut speed = T::zero();
    let n = 64;
    for ki in 0..=4 {
        let i = vb.i_lo + (vb.i_hi - vb.i_lo) * real(ki as f64 / 4.0);
        for kx in 0..=n {
            let x = a + (b - a) * real(kx as f64 / n as f64);
            for p in [p_reach, -p_reach] {
                speed = speed.max(model.dp_h_1d(i, x, p)?.abs());
            }
        }
    }
    Ok(speed)
}

/// Builds the velocity lattice for a step size `dt` on `grid`.
///
/// The used radius is the practical one (doubled d_pH range over initial
/// slopes), clamped by the theoretical radius, the model validity box, and
/// domain feasibility (feet may not travel further than 0.45 x width per
/// step). The spacing is h/(m dt) with the largest integer m fitting the
/// point cap, so feet land on the m-fold refinement of the grid.
pub fn build_lattice<T: Real>(
    model: &ModelSpec<T>,
    grid: &GridSpec<T>,
    dt: T,
    lip_g: T,
) -> Result<VelocityLattice<T>> {
    let h = grid.spacing(0);
    let (a, b) = grid.bounds(0);
    let width = b - a;
    let v_theory = theory_radius(model, grid, lip_g);
    let practical = practical_radius(model, grid, lip_g)? * real(2.2);
    let floor = (h / dt) * real(4.0);
    let v_used = practical
        .max(floor)
        .min(v_theory)
        .min(width * real(0.45) / dt)
        .min(model.validity().pv_radius * real(0.95));

    let unit = h / dt;
    let max_half = (LATTICE_CAP - 1) / 2;
    let ratio = v_used / unit;
    let dv = if ratio <= real(max_half as f64) {
        // Refine: dv = h / (m dt) with the largest m under the cap.
        let m = (real::<T>(max_half as f64) / ratio).floor().max(T::one());
        unit / m
    } else {
        // Coarsen: dv = c h / dt with the smallest integer c under the cap.
        let c = (ratio / real(max_half as f64)).ceil();
        unit * c
    };
    let half_count = as_f64((v_used / dv).floor()) as usize;
    let half_count = half_count.min(max_half).max(1);
    Ok(VelocityLattice {
        dv,
        half_count,
        v_max: dv * real(half_count as f64),
        v_theory,
    })
}

/// One dynamic-programming step. Feet outside the domain are excluded; ties
/// break toward smaller |v|, then toward the more negative velocity. The
/// returned choices carry both the exact lattice argmin (which produced the
/// field, keeping the update monotone) and a parabola-vertex refinement used
/// by trajectory diagnostics.
pub fn sl_step<T: Real>(
    u: &Field<T>,
    i: T,
    dt: T,
    model: &ModelSpec<T>,
    lattice: &VelocityLattice<T>,
) -> Result<(Field<T>, ArgminChoices<T>)> {
    if u.grid.dim() != 1 {
        return Err(Error::Config(
            "semi-Lagrangian stepping is implemented for dim = 1".to_string(),
        ));
    }
    let grid = &u.grid;
    let (a, b) = grid.bounds(0);
    let h = grid.spacing(0);
    let n = grid.n_cells(0);
    let half = lattice.half_count as isize;
    let dv = lattice.dv;
    let values = &u.values;

    // All feet stay inside [a, b] and all speeds inside the lattice radius;
    // one range check here lets the inner loop use the unchecked evaluator.
    model.validate_ranges(i, a, b, lattice.v_max)?;

    let lerp = |x: T| -> T {
        let s = (x - a) / h;
        let idx = as_f64(s.floor()).max(0.0).min((n - 1) as f64) as usize;
        let t = (s - real(idx as f64)).max(T::zero()).min(T::one());
        values[idx] * (T::one() - t) + values[idx + 1] * t
    };

    struct NodeOut<T> {
        value: T,
        lattice_v: T,
        refined_v: T,
        saturated: bool,
    }

    let outs: Vec<NodeOut<T>> = (0..=n)
        .into_par_iter()
        .map(|node| -> Result<NodeOut<T>> {
            let x = grid.node_coord(0, node);
            // Feasible k range: a <= x - dt k dv <= b.
            let k_min_f = as_f64(((x - b) / (dt * dv)).ceil());
            let k_max_f = as_f64(((x - a) / (dt * dv)).floor());
            let k_lo = (k_min_f.max(-(half as f64)) as isize).max(-half);
            let k_hi = (k_max_f.min(half as f64) as isize).min(half);
            if k_lo > k_hi {
                return Err(Error::EmptyVelocitySet {
                    node,
                    x: as_f64(x),
                });
            }

            let cost_at = |k: isize| -> T {
                let v = dv * real(k as f64);
                let foot = x - dt * v;
                dt * model.l_value_1d_unchecked(i, foot, v) + lerp(foot)
            };

            let mut best_k = 0isize;
            let mut best = T::infinity();
            // Visit in order of |k| with the negative sign first, so the
            // strict-improvement rule realizes the tie-breaking convention.
            let reach = (-k_lo).max(k_hi);
            for m in 0..=reach {
                if m > 0 {
                    let k = -m;
                    if k >= k_lo && k <= k_hi {
                        let c = cost_at(k);
                        if c < best {
                            best = c;
                            best_k = k;
                        }
                    }
                    let k = m;
                    if k >= k_lo && k <= k_hi {
                        let c = cost_at(k);
                        if c < best {
                            best = c;
                            best_k = k;
                        }
                    }
                } else if k_lo <= 0 && k_hi >= 0 {
                    best = cost_at(0);
                    best_k = 0;
                }
            }

            // Parabola vertex through the argmin and its neighbours; used
            // only for trajectory work, never for the field.
            let lattice_v = dv * real(best_k as f64);
            let mut refined_v = lattice_v;
            if best_k > k_lo && best_k < k_hi {
                let c_m = cost_at(best_k - 1);
                let c_p = cost_at(best_k + 1);
                let denom = c_p - best - best + c_m;
                if denom > T::zero() {
                    let delta = (c_m - c_p) / (denom + denom);
                    refined_v = lattice_v + dv * delta.max(-T::one()).min(T::one());
                }
            }

            Ok(NodeOut {
                value: best,
                lattice_v,
                refined_v,
                saturated: best_k.unsigned_abs() == lattice.half_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let field = Field {
        grid: grid.clone(),
        values: outs.iter().map(|o| o.value).collect(),
        time: u.time + dt,
    };
    field.assert_finite(u.time)?;
    let choices = ArgminChoices {
        lattice_v: outs.iter().map(|o| o.lattice_v).collect(),
        refined_v: outs.iter().map(|o| o.refined_v).collect(),
        saturated: outs.iter().filter(|o| o.saturated).count(),
    };
    Ok((field, choices))
}

/// The semi-Lagrangian route as a constraint-engine stepper (fixed dt; the
/// scheme is unconditionally stable).
pub struct SlStepper<'m, T: Real> {
    pub model: &'m ModelSpec<T>,
    pub lattice: VelocityLattice<T>,
    pub dt: T,
}

impl<T: Real> Stepper<T> for SlStepper<'_, T> {
    fn step(&self, u: &Field<T>, i: T, dt: T) -> Result<StepOutcome<T>> {
        let (field, choices) = sl_step(u, i, dt, self.model, &self.lattice)?;
        Ok(StepOutcome {
            field,
            choices: Some(choices),
        })
    }

    fn dt_hint(&self, _u: &Field<T>, _i: T) -> Result<T> {
        Ok(self.dt)
    }

    fn route(&self) -> Route {
        Route::Sl
    }
}

/// Runs the full semi-Lagrangian route. Fields and argmin choices at every
/// step are retained so trajectories can be backtracked afterwards.
pub fn run_sl<T: Real>(
    params: &RunParams<T>,
    model: &ModelSpec<T>,
    dt: T,
) -> Result<RunResult<T>> {
    let lip_g = params.initial.discrete_lipschitz();
    let lattice = build_lattice(model, &params.initial.grid, dt, lip_g)?;
    let stepper = SlStepper { model, lattice, dt };
    let sped = multiplier::LinearitySped::new(
        &stepper,
        model.multiplier_linearity(),
        model.validity().i_lo,
    );
    let mut p = params.clone();
    p.keep_fields = true;
    multiplier::run(&p, &sped)
}

/// A backtracked minimizing curve.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    /// Sample times s_0 = 0 < ... < s_n = t.
    pub times: Vec<T>,
    /// Positions gamma(s_k).
    pub positions: Vec<T>,
    /// Velocities on intervals (length n), extracted through the duality
    /// v = dH/dp(I, gamma, Du): smooth in the grid, free of lattice
    /// quantization jitter.
    pub velocities: Vec<T>,
    /// The argmin-following velocities that generated the positions.
    pub feet_velocities: Vec<T>,
    /// |D+u - D-u| of the field at gamma per interval: a kink indicator for
    /// the value function. O(h) at smooth points, O(1) across a gradient
    /// shock, where the dual velocity extraction is unreliable.
    pub gradient_gaps: Vec<T>,
    /// Discrete action: sum of dt L at the feet plus the initial datum.
    pub action: T,
    pub bv_velocity: T,
    pub endpoint: T,
    pub end_time: T,
    pub grid_spacing: T,
}

impl<T: Real> Trajectory<T> {
    /// (1/t) integral of |gamma_dot|.
    pub fn mean_abs_velocity(&self) -> T {
        let t = self.end_time;
        if t <= T::zero() {
            return T::zero();
        }
        let mut acc = T::zero();
        for (k, v) in self.velocities.iter().enumerate() {
            acc = acc + v.abs() * (self.times[k + 1] - self.times[k]);
        }
        acc / t
    }
}

/// Sum of norms of consecutive differences (total variation of a sampled
/// function of time).
pub fn bv_seminorm<T: Real>(samples: &[T]) -> T {
    samples
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(T::zero(), |a, b| a + b)
}

/// One-sided gradient gap |D+u - D-u| at the node nearest to x.
fn gradient_gap<T: Real>(field: &Field<T>, x: T) -> T {
    let grid = &field.grid;
    let (a, _) = grid.bounds(0);
    let h = grid.spacing(0);
    let n = grid.n_cells(0);
    let j = as_f64(((x - a) / h).round()).max(1.0).min((n - 1) as f64) as usize;
    let dm = (field.values[j] - field.values[j - 1]) / h;
    let dp = (field.values[j + 1] - field.values[j]) / h;
    (dp - dm).abs()
}

/// Centered-difference gradient of a nodal field, linearly interpolated at x.
fn smooth_gradient<T: Real>(field: &Field<T>, x: T) -> T {
    let grid = &field.grid;
    let (a, _) = grid.bounds(0);
    let h = grid.spacing(0);
    let n = grid.n_cells(0);
    let g_at = |k: usize| -> T {
        if k == 0 {
            (field.values[1] - field.values[0]) / h
        } else if k >= n {
            (field.values[n] - field.values[n - 1]) / h
        } else {
            (field.values[k + 1] - field.values[k - 1]) / (h + h)
        }
    };
    let s = (x - a) / h;
    let idx = as_f64(s.floor()).max(0.0).min((n - 1) as f64) as usize;
    let t = (s - real(idx as f64)).max(T::zero()).min(T::one());
    g_at(idx) * (T::one() - t) + g_at(idx + 1) * t
}

/// Follows the stored argmin velocities backwards from (t, x) to time 0.
/// (t, x) snap to the nearest step boundary and node.
pub fn backtrack_trajectory<T: Real>(
    run: &RunResult<T>,
    t: T,
    x: T,
    model: &ModelSpec<T>,
) -> Result<Trajectory<T>> {
    let (fields, choices) = match (&run.fields, &run.choices) {
        (Some(f), Some(c)) => (f, c),
        _ => return Err(Error::UnsupportedRun),
    };
    let bounds = &run.path.t_bounds;
    if bounds.len() < 2 {
        return Err(Error::Config("run has no steps to backtrack".to_string()));
    }
    // Snap t to the nearest step boundary >= the first step.
    let mut j = 1usize;
    for k in 1..bounds.len() {
        if (bounds[k] - t).abs() < (bounds[j] - t).abs() {
            j = k;
        }
    }
    let grid = &run.grid;
    let (a, b) = grid.bounds(0);
    let h = grid.spacing(0);
    let node = as_f64(((x - a) / h).round())
        .max(0.0)
        .min(grid.n_cells(0) as f64) as usize;
    let x_snap = grid.node_coord(0, node);

    let mut positions = vec![x_snap];
    let mut feet_velocities = Vec::new();
    let mut velocities = Vec::new();
    let mut gaps = Vec::new();
    let mut times = vec![bounds[j]];
    let mut action = T::zero();

    let mut gamma = x_snap;
    for k in (1..=j).rev() {
        let dt = bounds[k] - bounds[k - 1];
        let i_k = run.path.values[k - 1];
        let ch = &choices[k - 1];
        let node = as_f64(((gamma - a) / h).round())
            .max(0.0)
            .min(grid.n_cells(0) as f64) as usize;
        let v_foot = ch.refined_v[node];
        let foot = (gamma - dt * v_foot).max(a).min(b);

        // Reported velocity through the duality v = dH/dp(I, x, Du).
        let p = smooth_gradient(&fields[k], gamma);
        let v_dual = model.dp_h_1d(i_k, gamma, p)?;

        action = action + dt * model.l_value_1d(i_k, foot, v_foot)?;
        feet_velocities.push(v_foot);
        velocities.push(v_dual);
        gaps.push(gradient_gap(&fields[k], gamma));
        positions.push(foot);
        times.push(bounds[k - 1]);
        gamma = foot;
    }
    action = action + interpolate(&fields[0], &[gamma])?;

    positions.reverse();
    feet_velocities.reverse();
    velocities.reverse();
    gaps.reverse();
    times.reverse();
    let bv_velocity = bv_seminorm(&velocities);

    Ok(Trajectory {
        times,
        positions,
        velocities,
        feet_velocities,
        gradient_gaps: gaps,
        action,
        bv_velocity,
        endpoint: x_snap,
        end_time: bounds[j],
        grid_spacing: h,
    })
}

/// Sup norm of the discrete Euler-Lagrange residual
/// d/ds[d_v L(I, gamma, gamma_dot)] - d_x L(I, gamma, gamma_dot)
/// over interior junctions. Two kinds of junction are excluded: those
/// straddling a jump of the multiplier path (the distributional equation
/// carries a measure there), and those where the dual and argmin velocity
/// estimates disagree materially, which marks a gradient shock of the value
/// function (merging minimizers) where the classical equation fails too.
pub fn euler_lagrange_residual<T: Real>(
    traj: &Trajectory<T>,
    path: &MultiplierPath<T>,
    model: &ModelSpec<T>,
    jump_floor: T,
) -> Result<T> {
    let n = traj.velocities.len();
    if n < 2 {
        return Ok(T::zero());
    }
    let jumps = path.jump_events(path.default_jump_window(), jump_floor);
    let mid = |k: usize| (traj.times[k] + traj.times[k + 1]) / real(2.0);
    let h = traj.grid_spacing;
    let smooth = |k: usize| {
        let v = traj.velocities[k];
        (v - traj.feet_velocities[k]).abs() <= real::<T>(0.25) * (T::one() + v.abs())
            && traj.gradient_gaps[k] <= real::<T>(16.0) * h * (T::one() + v.abs())
    };

    // Momentum on each interval.
    let mut p = Vec::with_capacity(n);
    let mut i_of = Vec::with_capacity(n);
    for k in 0..n {
        let i_k = path.value_at(mid(k));
        let x_mid = (traj.positions[k] + traj.positions[k + 1]) / real(2.0);
        let bundle = model.eval_lagrangian(i_k, &[x_mid], &[traj.velocities[k]])?;
        p.push(bundle.d_pv[0]);
        i_of.push(i_k);
    }

    let mut sup = T::zero();
    for k in 1..n {
        let t_junction = traj.times[k];
        let dt_bar = (traj.times[k + 1] - traj.times[k - 1]) / real(2.0);
        if dt_bar <= T::zero() {
            continue;
        }
        let near_jump = jumps
            .iter()
            .any(|(tj, _)| (*tj - t_junction).abs() <= dt_bar * real(1.5));
        if near_jump || !smooth(k - 1) || !smooth(k) {
            continue;
        }
        let v_bar = (traj.velocities[k - 1] + traj.velocities[k]) / real(2.0);
        let d_x = model
            .eval_lagrangian(i_of[k], &[traj.positions[k]], &[v_bar])?
            .d_x[0];
        sup = sup.max(((p[k] - p[k - 1]) / dt_bar - d_x).abs());
    }
    Ok(sup)
}
