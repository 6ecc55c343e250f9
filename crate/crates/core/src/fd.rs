//! Monotone finite-difference stepping for the constrained equation:
//! u+ = u - dt H^(I, x, D+u, D-u) nodewise, with a numerical Hamiltonian H^
//! that is non-decreasing in D-u and non-increasing in D+u.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::ModelSpec;
use crate::multiplier::{self, Route, RunParams, RunResult, StepOutcome, Stepper};
use crate::real::{as_f64, real, Real};

/// Scheme choices. Lax-Friedrichs is monotone for any convex Hamiltonian;
/// the convex upwind (Godunov) selector is sharper near kinks and adds no
/// dissipation at the field argmin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    LaxFriedrichs,
    UpwindConvex,
}

/// One-sided difference quotients at interior node k (1..n-1).
#[inline]
fn one_sided<T: Real>(values: &[T], k: usize, h: T) -> (T, T) {
    let d_minus = (values[k] - values[k - 1]) / h;
    let d_plus = (values[k + 1] - values[k]) / h;
    (d_minus, d_plus)
}

/// Largest |dH/dp| over the field's one-sided gradient range, optionally
/// padded. Convexity puts the maximum at the range endpoints.
pub(crate) fn max_wave_speed<T: Real>(
    u: &Field<T>,
    i: T,
    model: &ModelSpec<T>,
    pad: T,
) -> Result<T> {
    let h = u.grid.spacing(0);
    let n = u.grid.n_cells(0);
    let mut g_lo = T::infinity();
    let mut g_hi = T::neg_infinity();
    for k in 1..n {
        let (dm, dp) = one_sided(&u.values, k, h);
        g_lo = g_lo.min(dm).min(dp);
        g_hi = g_hi.max(dm).max(dp);
    }
    let width = g_hi - g_lo;
    g_lo = g_lo - width * pad;
    g_hi = g_hi + width * pad;
    let mut speed = T::zero();
    for k in (0..=n).step_by((n / 64).max(1)) {
        let x = u.grid.node_coord(0, k);
        speed = speed
            .max(model.dp_h_1d(i, x, g_lo)?.abs())
            .max(model.dp_h_1d(i, x, g_hi)?.abs());
    }
    Ok(speed)
}

/// The one-sided gradient range of the field's interior.
fn gradient_range<T: Real>(u: &Field<T>) -> (T, T) {
    let h = u.grid.spacing(0);
    let n = u.grid.n_cells(0);
    let mut g_lo = T::infinity();
    let mut g_hi = T::neg_infinity();
    for k in 1..n {
        let (dm, dp) = one_sided(&u.values, k, h);
        g_lo = g_lo.min(dm).min(dp);
        g_hi = g_hi.max(dm).max(dp);
    }
    (g_lo, g_hi)
}

/// Boundary treatment for the explicit stepper.
#[derive(Debug, Clone, Copy)]
pub enum BoundaryPolicy<T> {
    /// Boundary nodes keep their current values.
    Frozen,
    /// Boundary nodes track their interior neighbour offset by the initial
    /// data's growth slope, staying a barrier from above with a bounded
    /// boundary-cell gradient: u[0] = u[1] + left, u[n] = u[n-1] + right.
    SlopeExtrapolated { left: T, right: T },
}

impl<T: Real> BoundaryPolicy<T> {
    /// Offsets taken from the initial field's end cells.
    pub fn from_initial(initial: &Field<T>) -> Self {
        let n = initial.values.len() - 1;
        BoundaryPolicy::SlopeExtrapolated {
            left: initial.values[0] - initial.values[1],
            right: initial.values[n] - initial.values[n - 1],
        }
    }
}

/// One explicit step. Boundary nodes follow the configured policy; interior
/// nodes get the monotone update. Errors on CFL violation or non-finite
/// output.
pub fn fd_step<T: Real>(
    u: &Field<T>,
    i: T,
    dt: T,
    model: &ModelSpec<T>,
    scheme: FdScheme,
    boundary: BoundaryPolicy<T>,
) -> Result<Field<T>> {
    if u.grid.dim() != 1 {
        return Err(Error::Config(
            "finite-difference stepping is implemented for dim = 1".to_string(),
        ));
    }
    let h = u.grid.spacing(0);
    let n = u.grid.n_cells(0);

    let speed = max_wave_speed(u, i, model, real(0.1))?;
    let limit = match scheme {
        FdScheme::LaxFriedrichs => h / speed.max(real(1e-30)),
        FdScheme::UpwindConvex => h / (speed + speed).max(real(1e-30)),
    };
    if dt > limit * (T::one() + real(1e-12)) {
        return Err(Error::StepSize {
            dt: as_f64(dt),
            limit: as_f64(limit),
            time: as_f64(u.time),
        });
    }

    let alpha = speed; // LF dissipation, already padded via the range
    let p0 = model.argmin_p();
    let values = &u.values;
    let grid = &u.grid;

    // One range check up front; the inner loop then runs uncheck-ed.
    let (g_lo, g_hi) = gradient_range(u);
    let (a0, b0) = u.grid.bounds(0);
    model.validate_ranges(i, a0, b0, g_lo.abs().max(g_hi.abs()))?;

    let update = |(j, v): (usize, &mut T)| {
        let k = j + 1;
        let x = grid.node_coord(0, k);
        let (dm, dp) = one_sided(values, k, h);
        let h_hat = match scheme {
            FdScheme::LaxFriedrichs => {
                let avg = (dm + dp) / real(2.0);
                model.h_value_1d_unchecked(i, x, avg) - alpha * (dp - dm) / real(2.0)
            }
            FdScheme::UpwindConvex => {
                let a = model.h_value_1d_unchecked(i, x, dm.max(p0));
                let b = model.h_value_1d_unchecked(i, x, dp.min(p0));
                a.max(b)
            }
        };
        *v = values[k] - dt * h_hat;
    };

    // The nodewise updates are independent; below the threshold the rayon
    // dispatch costs more than the work itself.
    let mut out = values.clone();
    if n < 16_384 {
        out[1..n].iter_mut().enumerate().for_each(update);
    } else {
        out[1..n].par_iter_mut().enumerate().for_each(update);
    }

    if let BoundaryPolicy::SlopeExtrapolated { left, right } = boundary {
        out[0] = out[1] + left;
        out[n] = out[n - 1] + right;
    }

    let field = Field {
        grid: u.grid.clone(),
        values: out,
        time: u.time + dt,
    };
    field.assert_finite(u.time)?;
    Ok(field)
}

/// The finite-difference route as a constraint-engine stepper.
pub struct FdStepper<'m, T: Real> {
    pub model: &'m ModelSpec<T>,
    pub scheme: FdScheme,
    pub boundary: BoundaryPolicy<T>,
    /// CFL safety factor (dt = factor * h / max wave speed).
    pub cfl: T,
}

impl<'m, T: Real> FdStepper<'m, T> {
    pub fn new(model: &'m ModelSpec<T>, scheme: FdScheme, initial: &Field<T>) -> Self {
        FdStepper {
            model,
            scheme,
            boundary: BoundaryPolicy::from_initial(initial),
            cfl: real(0.4),
        }
    }
}

impl<T: Real> Stepper<T> for FdStepper<'_, T> {
    fn step(&self, u: &Field<T>, i: T, dt: T) -> Result<StepOutcome<T>> {
        Ok(StepOutcome {
            field: fd_step(u, i, dt, self.model, self.scheme, self.boundary)?,
            choices: None,
        })
    }

    fn dt_hint(&self, u: &Field<T>, i: T) -> Result<T> {
        let speed = max_wave_speed(u, i, self.model, T::zero())?;
        Ok(self.cfl * u.grid.spacing(0) / speed.max(real(1e-12)))
    }

    fn route(&self) -> Route {
        Route::Fd
    }
}

/// Runs the full finite-difference route.
pub fn run_fd<T: Real>(
    params: &RunParams<T>,
    model: &ModelSpec<T>,
    scheme: FdScheme,
) -> Result<RunResult<T>> {
    let stepper = FdStepper::new(model, scheme, &params.initial);
    let sped = multiplier::LinearitySped::new(
        &stepper,
        model.multiplier_linearity(),
        model.validity().i_lo,
    );
    multiplier::run(params, &sped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{ModelSpec, QuadraticGrowth, ValidityBox};
    use crate::multiplier::ConstraintSolve;
    use approx::assert_abs_diff_eq;

    fn free_model(r_const: f64) -> ModelSpec<f64> {
        // H = r_const + p^2, no I dependence.
        ModelSpec::quadratic(
            QuadraticGrowth {
                a: r_const,
                b: 0.0,
                curv: 0.0,
                center: 0.0,
                i_coeff: 0.0,
            },
            ValidityBox {
                i_lo: 0.0,
                i_hi: 1.0,
                x_center: 0.0,
                x_radius: 16.0,
                pv_radius: 64.0,
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn constant_field_is_stationary_without_growth() {
        let model = free_model(0.0);
        let grid = GridSpec::new_1d(-2.0, 2.0, 64).unwrap();
        let u = Field::constant(&grid, 0.0, 3.0);
        for scheme in [FdScheme::LaxFriedrichs, FdScheme::UpwindConvex] {
            let out = fd_step(&u, 0.0, 1e-3, &model, scheme, BoundaryPolicy::Frozen).unwrap();
            for v in &out.values {
                assert_abs_diff_eq!(*v, 3.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn five_node_lax_friedrichs_update_matches_brute_force() {
        // g = |x| on 5 nodes, H = -1 + p^2: u+ = u + dt (1 - |Du|^2_num).
        let model = free_model(-1.0);
        let grid = GridSpec::new_1d(-1.0, 1.0, 4).unwrap();
        let u = Field::from_fn(&grid, 0.0, |x: &[f64]| x[0].abs());
        let h = 0.5;
        let dt = 1e-2;
        let out = fd_step(&u, 0.0, dt, &model, FdScheme::LaxFriedrichs, BoundaryPolicy::Frozen).unwrap();

        // Brute-force reimplementation of the update rule.
        let vals = &u.values;
        let mut grads = Vec::new();
        for k in 1..4 {
            grads.push((vals[k] - vals[k - 1]) / h);
            grads.push((vals[k + 1] - vals[k]) / h);
        }
        let (g_lo, g_hi) = grads
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| {
                (lo.min(g), hi.max(g))
            });
        let w = g_hi - g_lo;
        let alpha = 2.0 * (g_lo - 0.1 * w).abs().max((g_hi + 0.1 * w).abs());
        for k in 1..4 {
            let dm = (vals[k] - vals[k - 1]) / h;
            let dp = (vals[k + 1] - vals[k]) / h;
            let avg = 0.5 * (dm + dp);
            let expected = vals[k] - dt * ((-1.0 + avg * avg) - alpha * 0.5 * (dp - dm));
            assert_abs_diff_eq!(out.values[k], expected, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(out.values[0], vals[0], epsilon = 1e-15);
        assert_abs_diff_eq!(out.values[4], vals[4], epsilon = 1e-15);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let model = free_model(0.0);
        let grid = GridSpec::new_1d(-2.0, 2.0, 64).unwrap();
        let u = Field::from_fn(&grid, 0.0, |x| x[0] * x[0]);
        assert!(matches!(
            fd_step(&u, 0.0, 10.0, &model, FdScheme::LaxFriedrichs, BoundaryPolicy::Frozen),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn consistency_rate_is_first_order_on_smooth_fields() {
        // |H^ - H| measured against the exact Hamiltonian at known gradients
        // must shrink at least linearly on a refinement sequence.
        let model = free_model(0.0);
        let mut errors = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = GridSpec::new_1d(-2.0, 2.0, n).unwrap();
            let u = Field::from_fn(&grid, 0.0, |x: &[f64]| (x[0]).sin());
            let dt = 1e-4;
            let out = fd_step(&u, 0.0, dt, &model, FdScheme::LaxFriedrichs, BoundaryPolicy::Frozen).unwrap();
            let mut err: f64 = 0.0;
            for k in (n / 4)..(3 * n / 4) {
                let x = grid.node_coord(0, k);
                let h_hat = (u.values[k] - out.values[k]) / dt;
                let exact = x.cos() * x.cos();
                err = err.max((h_hat - exact).abs());
            }
            errors.push(err);
        }
        assert!(errors[1] <= errors[0] / 1.8, "{errors:?}");
        assert!(errors[2] <= errors[1] / 1.8, "{errors:?}");
    }

    #[test]
    fn quadratic_scenario_follows_the_riccati_profile() {
        // Independent oracle: a' = 1 - 4 a^2, a(0) = 1, integrated by RK4;
        // the multiplier must stay at 1 and u(t, x) at a(t) x^2.
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-2.5, 2.5, 400).unwrap();
        let params = RunParams {
            scenario: "quadratic".to_string(),
            initial: Field::from_fn(&grid, 0.0, |x| x[0] * x[0]),
            horizon: 0.25,
            snapshot_times: vec![0.125, 0.25],
            solve: ConstraintSolve::default(),
            keep_fields: false,
        };
        let run = run_fd(&params, &model, FdScheme::UpwindConvex).unwrap();

        for &i in &run.path.values {
            assert_abs_diff_eq!(i, 1.0, epsilon = 1e-2);
        }
        let mut a = 1.0f64;
        let f = |a: f64| 1.0 - 4.0 * a * a;
        let dt = 0.25 / 4096.0;
        for _ in 0..4096 {
            let k1 = f(a);
            let k2 = f(a + 0.5 * dt * k1);
            let k3 = f(a + 0.5 * dt * k2);
            let k4 = f(a + dt * k3);
            a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let snap = run.snapshot_at(0.25);
        let mut sup: f64 = 0.0;
        for k in 0..=400 {
            let x = grid.node_coord(0, k);
            if x.abs() <= 1.0 {
                sup = sup.max((snap.values[k] - a * x * x).abs());
            }
        }
        assert!(sup <= 1e-2, "profile error {sup}");
    }

    #[test]
    fn lipschitz_constant_grows_at_most_linearly() {
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-2.5, 2.5, 200).unwrap();
        let initial = Field::from_fn(&grid, 0.0, |x| x[0] * x[0]);
        let lip0 = initial.discrete_lipschitz();
        let params = RunParams {
            scenario: "quadratic".to_string(),
            initial,
            horizon: 0.2,
            snapshot_times: vec![0.1, 0.2],
            solve: ConstraintSolve::default(),
            keep_fields: false,
        };
        let run = run_fd(&params, &model, FdScheme::UpwindConvex).unwrap();
        let sup_hx = 2.0 * 2.5; // |d_x R| <= 2 |x| on the domain
        for snap in &run.snapshots {
            assert!(
                snap.discrete_lipschitz() <= lip0 + 1.2 * sup_hx * snap.time + 1e-9,
                "Lipschitz constant grew too fast at t = {}",
                snap.time
            );
        }
    }
}
