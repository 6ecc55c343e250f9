//! The regularized population route in Hopf-Cole variables: for fixed
//! epsilon, u satisfies u_t + R(I(t), x) + |u_x|^2 = eps u_xx with
//! I(t) = integral of psi exp(-u/eps). Here the constraint min u = 0 is not
//! imposed; it emerges as eps shrinks, which is what the convergence study
//! measures.

use crate::error::{Error, Result};
use crate::fd::max_wave_speed;
use crate::grid::{Field, GridSpec};
use crate::model::{ModelKind, ModelSpec};
use crate::multiplier::{MultiplierPath, RunParams, RunResult};
use crate::real::{as_f64, real, Real};

/// One explicit step of the viscous equation. The gradient term uses the
/// Lax-Friedrichs stabilized Hamiltonian; the Laplacian is the standard
/// 3-point stencil with homogeneous Neumann ends (ghost reflection).
pub fn eps_step<T: Real>(
    u: &Field<T>,
    i_eps: T,
    eps: T,
    dt: T,
    model: &ModelSpec<T>,
) -> Result<Field<T>> {
    if model.kind() != ModelKind::Quadratic {
        return Err(Error::Config(
            "the regularized route is defined for quadratic-kind models".to_string(),
        ));
    }
    if u.grid.dim() != 1 {
        return Err(Error::Config(
            "the regularized route is implemented for dim = 1".to_string(),
        ));
    }
    let h = u.grid.spacing(0);
    let n = u.grid.n_cells(0);

    let speed = max_wave_speed(u, i_eps, model, real(0.1))?;
    let advective = h / speed.max(real(1e-30));
    let parabolic = real::<T>(0.4) * h * h / (eps + eps).max(real(1e-30));
    let limit = advective.min(parabolic);
    if dt > limit * (T::one() + real(1e-12)) {
        return Err(Error::StepSize {
            dt: as_f64(dt),
            limit: as_f64(limit),
            time: as_f64(u.time),
        });
    }

    let alpha = speed;
    let vals = &u.values;
    let at = |k: isize| -> T {
        // Neumann reflection: u[-1] = u[1], u[n+1] = u[n-1].
        let k = if k < 0 {
            (-k) as usize
        } else if k as usize > n {
            2 * n - k as usize
        } else {
            k as usize
        };
        vals[k]
    };

    let mut out = vals.clone();
    for (k, v) in out.iter_mut().enumerate() {
        let x = u.grid.node_coord(0, k);
        let dm = (at(k as isize) - at(k as isize - 1)) / h;
        let dp = (at(k as isize + 1) - at(k as isize)) / h;
        let avg = (dm + dp) / real(2.0);
        let h_hat = model.h_value_1d(i_eps, x, avg)? - alpha * (dp - dm) / real(2.0);
        let lap = (at(k as isize + 1) - vals[k] - vals[k] + at(k as isize - 1)) / (h * h);
        *v = vals[k] - dt * (h_hat - eps * lap);
    }

    let field = Field {
        grid: u.grid.clone(),
        values: out,
        time: u.time + dt,
    };
    field.assert_finite(u.time)?;
    Ok(field)
}

/// Trapezoidal quadrature of psi exp(-u/eps), evaluated in log space: the
/// exponent is shifted by min u and the shift undone exactly on the log
/// scale, so a positive minimum can never underflow the sum. A strongly
/// negative minimum that would overflow the final exponential is an error.
pub fn compute_i_eps<T: Real>(
    u: &Field<T>,
    psi: &dyn Fn(T) -> T,
    eps: T,
) -> Result<T> {
    let h = u.grid.spacing(0);
    let n = u.grid.n_cells(0);
    let m = u.min();
    let mut sum = T::zero();
    for (k, &val) in u.values.iter().enumerate() {
        let x = u.grid.node_coord(0, k);
        let w = if k == 0 || k == n { h / real(2.0) } else { h };
        let p = psi(x);
        if !(p > T::zero()) || !p.is_finite() {
            return Err(Error::Config(format!(
                "weight psi must be positive and finite, got {} at x = {}",
                as_f64(p),
                as_f64(x)
            )));
        }
        sum = sum + w * p * (-(val - m) / eps).exp();
    }
    let log_i = -m / eps + sum.ln();
    let log_cap = T::max_value().ln() * real(0.98);
    if log_i > log_cap {
        return Err(Error::BlowUp {
            node: u.min_with_index().1,
            x: as_f64(u.grid.position(u.min_with_index().1)[0]),
            time: as_f64(u.time),
        });
    }
    Ok(log_i.exp())
}

/// Result of one regularized run.
#[derive(Debug, Clone)]
pub struct EpsRunResult<T: Real> {
    pub eps: T,
    pub grid: GridSpec<T>,
    pub horizon: T,
    /// I_eps as a step function; residuals hold min u at each step.
    pub path: MultiplierPath<T>,
    pub snapshots: Vec<Field<T>>,
    /// (t, min_x u) per accepted step.
    pub min_u: Vec<(T, T)>,
}

impl<T: Real> EpsRunResult<T> {
    /// sup over recorded times of |min_x u|.
    pub fn sup_abs_min_u(&self) -> T {
        self.min_u
            .iter()
            .map(|(_, m)| m.abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn snapshot_at(&self, t: T) -> &Field<T> {
        self.snapshots
            .iter()
            .min_by(|a, b| {
                (a.time - t)
                    .abs()
                    .partial_cmp(&(b.time - t).abs())
                    .unwrap()
            })
            .expect("at least the initial snapshot exists")
    }
}

/// Time loop with explicit coupling: the burden computed from the current
/// field drives the step. Nothing is root-found; the constraint emerges.
pub fn run_eps<T: Real>(
    params: &RunParams<T>,
    model: &ModelSpec<T>,
    eps: T,
    psi: &dyn Fn(T) -> T,
) -> Result<EpsRunResult<T>> {
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
    let mut path = MultiplierPath {
        t_bounds: vec![T::zero()],
        values: Vec::new(),
        residuals: Vec::new(),
        iterations: Vec::new(),
    };
    let mut min_u = Vec::new();

    let h = u.grid.spacing(0);
    let snap_tol = horizon * real(1e-10) + real(1e-14);
    let mut t = T::zero();
    let mut event_idx = 0usize;
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

        let i_now = compute_i_eps(&u, psi, eps)?;
        if !(i_now > T::zero()) {
            return Err(Error::BlowUp {
                node: 0,
                x: 0.0,
                time: as_f64(t),
            });
        }
        let speed = max_wave_speed(&u, i_now, model, T::zero())?;
        let dt_stable = (real::<T>(0.4) * h / speed.max(real(1e-12)))
            .min(real::<T>(0.4) * h * h / (eps + eps));
        let dt = dt_stable.max(real(1e-7)).min(target - t);

        u = eps_step(&u, i_now, eps, dt, model)?;
        t = t + dt;
        u.time = t;

        path.t_bounds.push(t);
        path.values.push(i_now);
        path.residuals.push(u.min());
        path.iterations.push(1);
        min_u.push((t, u.min()));
    }

    Ok(EpsRunResult {
        eps,
        grid: params.initial.grid.clone(),
        horizon,
        path,
        snapshots,
        min_u,
    })
}

/// One row of the vanishing-regularization study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// L1 distance of I_eps to the reference multiplier over the tail
    /// window (the initial layer is excluded by construction).
    pub l1_i: f64,
    pub sup_abs_min_u: f64,
    /// Sup difference of u against the reference on the core box at the
    /// final time.
    pub sup_u_core: f64,
    pub order_l1: Option<f64>,
    pub order_min_u: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceTable {
    /// Comparison window [from, to]; starts at 0.1 T.
    pub from: f64,
    pub to: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// Errors and empirical orders for a list of regularized runs against a
/// constrained reference run. The observed orders are reported, never
/// asserted against a target rate.
pub fn convergence_table<T: Real>(
    runs: &[EpsRunResult<T>],
    reference: &RunResult<T>,
) -> Result<ConvergenceTable> {
    if runs.is_empty() {
        return Err(Error::Config(
            "convergence study needs a non-empty epsilon list".to_string(),
        ));
    }
    let horizon = reference.horizon;
    let from = horizon * real(0.1);
    let (ga, gb) = reference.grid.bounds(0);
    let center = (ga + gb) / real(2.0);
    let quarter = (gb - ga) / real(4.0);

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for run in runs {
        let l1 = run.path.l1_distance(&reference.path, from, horizon);
        let sup_min = run.sup_abs_min_u();
        let eps_snap = run.snapshot_at(horizon);
        let ref_snap = reference.snapshot_at(horizon);
        let mut sup_u = T::zero();
        for k in 0..ref_snap.values.len() {
            let x = ref_snap.grid.position(k)[0];
            if (x - center).abs() <= quarter {
                let other = crate::grid::interpolate(eps_snap, &[x])?;
                sup_u = sup_u.max((ref_snap.values[k] - other).abs());
            }
        }
        let (order_l1, order_min_u) = match rows.last() {
            Some(prev) if prev.eps != as_f64(run.eps) => {
                let ratio = prev.eps / as_f64(run.eps);
                let ord = |e_prev: f64, e_now: f64| {
                    if e_prev > 0.0 && e_now > 0.0 {
                        Some((e_prev / e_now).ln() / ratio.ln())
                    } else {
                        None
                    }
                };
                (
                    ord(prev.l1_i, as_f64(l1)),
                    ord(prev.sup_abs_min_u, as_f64(sup_min)),
                )
            }
            _ => (None, None),
        };
        rows.push(ConvergenceRow {
            eps: as_f64(run.eps),
            l1_i: as_f64(l1),
            sup_abs_min_u: as_f64(sup_min),
            sup_u_core: as_f64(sup_u),
            order_l1,
            order_min_u,
        });
    }
    Ok(ConvergenceTable {
        from: as_f64(from),
        to: as_f64(horizon),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{ModelSpec, QuadraticGrowth, ValidityBox};
    use approx::assert_abs_diff_eq;

    fn free_model() -> ModelSpec<f64> {
        ModelSpec::quadratic(
            QuadraticGrowth {
                a: 0.0,
                b: 0.0,
                curv: 0.0,
                center: 0.0,
                i_coeff: 0.0,
            },
            ValidityBox {
                i_lo: 0.0,
                i_hi: 2.0,
                x_center: 0.0,
                x_radius: 16.0,
                pv_radius: 64.0,
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn constant_field_is_stationary() {
        let model = free_model();
        let grid = GridSpec::new_1d(-2.0, 2.0, 64).unwrap();
        let u = Field::constant(&grid, 0.0, 1.0);
        let out = eps_step(&u, 0.5, 0.05, 1e-4, &model).unwrap();
        for v in &out.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn five_node_update_matches_brute_force() {
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-1.0, 1.0, 4).unwrap();
        let u = Field::from_fn(&grid, 0.0, |x| x[0] * x[0]);
        let (i_eps, eps, dt, h) = (0.7, 0.05, 1e-3, 0.5);
        let out = eps_step(&u, i_eps, eps, dt, &model).unwrap();

        let vals = &u.values;
        let at = |k: isize| -> f64 {
            let k = if k < 0 { -k } else if k > 4 { 8 - k } else { k };
            vals[k as usize]
        };
        // Same padded global dissipation rule as the hyperbolic stepper.
        let mut g_lo = f64::INFINITY;
        let mut g_hi = f64::NEG_INFINITY;
        for k in 1..4 {
            g_lo = g_lo.min((vals[k] - vals[k - 1]) / h).min((vals[k + 1] - vals[k]) / h);
            g_hi = g_hi.max((vals[k] - vals[k - 1]) / h).max((vals[k + 1] - vals[k]) / h);
        }
        let w = g_hi - g_lo;
        let alpha = 2.0 * (g_lo - 0.1 * w).abs().max((g_hi + 0.1 * w).abs());
        for k in 0..=4 {
            let x = grid.node_coord(0, k);
            let dm = (at(k as isize) - at(k as isize - 1)) / h;
            let dp = (at(k as isize + 1) - at(k as isize)) / h;
            let avg = 0.5 * (dm + dp);
            let r = 1.0 - i_eps - x * x;
            let h_hat = (r + avg * avg) - alpha * 0.5 * (dp - dm);
            let lap = (at(k as isize + 1) - 2.0 * vals[k] + at(k as isize - 1)) / (h * h);
            let expected = vals[k] - dt * (h_hat - eps * lap);
            assert_abs_diff_eq!(out.values[k], expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn parabolic_step_bound_is_enforced() {
        let model = free_model();
        let grid = GridSpec::new_1d(-2.0, 2.0, 128).unwrap();
        let u = Field::constant(&grid, 0.0, 0.0);
        // dt far above 0.4 h^2 / (2 eps)
        assert!(matches!(
            eps_step(&u, 0.0, 0.1, 1e-2, &model),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn burden_integral_matches_the_closed_form() {
        // u = eps |x|, psi = 1: integral of e^{-|x|} = 2 (1 - e^{-X}).
        let eps = 0.3;
        let grid = GridSpec::new_1d(-4.0, 4.0, 2048).unwrap();
        let u = Field::from_fn(&grid, 0.0, |x: &[f64]| eps * x[0].abs());
        let got = compute_i_eps(&u, &|_| 1.0, eps).unwrap();
        let exact = 2.0 * (1.0 - (-4.0f64).exp());
        assert_abs_diff_eq!(got, exact, epsilon = 1e-4);
    }

    #[test]
    fn flat_field_gives_domain_length_and_psi_is_linear() {
        let grid = GridSpec::new_1d(-1.0, 3.0, 256).unwrap();
        let u = Field::constant(&grid, 0.0, 0.0);
        let one = compute_i_eps(&u, &|_| 1.0, 0.1).unwrap();
        assert_abs_diff_eq!(one, 4.0, epsilon = 1e-12);
        let two = compute_i_eps(&u, &|_| 2.0, 0.1).unwrap();
        assert_abs_diff_eq!(two, 2.0 * one, epsilon = 1e-12);
    }

    #[test]
    fn non_positive_weight_is_rejected() {
        let grid = GridSpec::new_1d(-1.0, 1.0, 64).unwrap();
        let u = Field::constant(&grid, 0.0, 0.0);
        assert!(compute_i_eps(&u, &|x| x, 0.1).is_err());
    }

    #[test]
    fn deep_negative_minimum_is_a_blow_up_error() {
        let grid = GridSpec::new_1d(-1.0, 1.0, 64).unwrap();
        let u = Field::constant(&grid, 0.0, -80.0);
        assert!(matches!(
            compute_i_eps(&u, &|_| 1.0, 1e-4),
            Err(Error::BlowUp { .. })
        ));
    }

    #[test]
    fn empty_eps_list_is_an_error() {
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-2.0, 2.0, 64).unwrap();
        let params = RunParams {
            scenario: "quadratic".to_string(),
            initial: Field::from_fn(&grid, 0.0, |x| x[0] * x[0]),
            horizon: 0.02,
            snapshot_times: vec![0.02],
            solve: crate::multiplier::ConstraintSolve::default(),
            keep_fields: false,
        };
        let reference = crate::fd::run_fd(&params, &model, crate::fd::FdScheme::UpwindConvex)
            .unwrap();
        assert!(convergence_table::<f64>(&[], &reference).is_err());
        // Single-eps table: one row, no order estimates.
        let run = run_eps(&params, &model, 0.1, &|_| 1.0).unwrap();
        let table = convergence_table(&[run], &reference).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].order_l1.is_none());
    }

    #[test]
    fn burden_emerges_near_the_constrained_value() {
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-2.5, 2.5, 200).unwrap();
        let params = RunParams {
            scenario: "quadratic".to_string(),
            initial: Field::from_fn(&grid, 0.0, |x| x[0] * x[0]),
            horizon: 0.4,
            snapshot_times: vec![0.4],
            solve: crate::multiplier::ConstraintSolve::default(),
            keep_fields: false,
        };
        let run = run_eps(&params, &model, 0.1, &|_| 1.0).unwrap();
        // After the initial layer, I_eps sits within 0.2 of the constrained
        // value 1.
        for (k, &i) in run.path.values.iter().enumerate() {
            if run.path.t_bounds[k + 1] >= 0.2 {
                assert!((i - 1.0).abs() <= 0.35, "I_eps = {i} at t = {}", run.path.t_bounds[k + 1]);
            }
        }
        assert!(run.path.values.iter().all(|&i| i > 0.0));
    }
}
