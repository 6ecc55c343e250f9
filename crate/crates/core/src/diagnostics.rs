//! Solution-level checks: burden monotonicity (the pessimization principle),
//! cross-route agreement of the multiplier and the value function, positivity
//! of the averaged multiplier-sensitivity weights along minimizing curves,
//! and the travel-cost lower bound on truncated domains.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::interpolate;
use crate::model::ModelSpec;
use crate::multiplier::{MultiplierPath, RunResult};
use crate::real::{as_f64, real, Real};
use crate::sl::Trajectory;

/// One named check with its tolerance and worst witness.
#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    /// None = not applicable for this scenario/model.
    pub passed: Option<bool>,
    pub tolerance: f64,
    pub witness_time: f64,
    pub witness_position: f64,
    pub witness_value: f64,
    pub details: String,
}

impl CheckEntry {
    pub fn failed(&self) -> bool {
        self.passed == Some(false)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DiagnosticsReport {
    pub entries: Vec<CheckEntry>,
}

impl DiagnosticsReport {
    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn any_failed(&self) -> bool {
        self.entries.iter().any(|e| e.failed())
    }
}

/// Burden monotonicity: passes iff I_{n+1} >= I_n - tol for every step.
/// Applicable only when the model satisfies the rest-velocity-minimum
/// property; callers pass `applicable = false` otherwise and the entry is
/// marked not-applicable rather than failed.
pub fn check_pessimization<T: Real>(
    path: &MultiplierPath<T>,
    tol: T,
    applicable: bool,
) -> CheckEntry {
    let mut worst = T::infinity();
    let mut worst_t = T::zero();
    for k in 1..path.values.len() {
        let inc = path.values[k] - path.values[k - 1];
        if inc < worst {
            worst = inc;
            worst_t = path.t_bounds[k];
        }
    }
    let passed = if path.values.len() < 2 {
        true
    } else {
        worst >= -tol
    };
    CheckEntry {
        name: "pessimization".to_string(),
        passed: if applicable { Some(passed) } else { None },
        tolerance: as_f64(tol),
        witness_time: as_f64(worst_t),
        witness_position: f64::NAN,
        witness_value: as_f64(worst),
        details: if applicable {
            "min step increment of the burden".to_string()
        } else {
            "model lacks the rest-velocity-minimum property; not applicable".to_string()
        },
    }
}

/// Default monotonicity slack: twice the root-find bracket width plus the
/// constraint tolerance.
pub fn pessimization_tol<T: Real>(run: &RunResult<T>) -> T {
    (run.bracket_width + run.tol_constraint) * real(2.0)
}

/// Quantitative comparison of two runs of the same scenario.
#[derive(Debug, Clone, Serialize)]
pub struct RouteComparison {
    pub l1_multiplier: f64,
    pub sup_u_core: f64,
    pub jumps_1: Vec<f64>,
    pub jumps_2: Vec<f64>,
    pub jumps_aligned: bool,
    pub alignment_tol: f64,
}

/// Compares multiplier paths in L1(0, T), value functions in sup norm over
/// the core box at common snapshot times, and jump locations. Snapshot
/// times within one alignment window of a detected jump are excluded from
/// the pointwise field comparison.
pub fn compare_runs<T: Real>(
    run1: &RunResult<T>,
    run2: &RunResult<T>,
) -> Result<(RouteComparison, Vec<CheckEntry>)> {
    if run1.scenario != run2.scenario {
        return Err(Error::ScenarioMismatch(format!(
            "{} vs {}",
            run1.scenario, run2.scenario
        )));
    }
    if (run1.horizon - run2.horizon).abs() > run1.horizon * real(1e-9) {
        return Err(Error::ScenarioMismatch(format!(
            "horizons differ: {} vs {}",
            as_f64(run1.horizon),
            as_f64(run2.horizon)
        )));
    }
    let horizon = run1.horizon;
    let l1 = run1.path.l1_distance(&run2.path, T::zero(), horizon);

    let dt1 = max_step(run1);
    let dt2 = max_step(run2);
    let align_tol = (dt1.max(dt2)) * real(2.0);

    // Detect jumps with a common aggregation window so both paths see the
    // same effective resolution, then require bidirectional matching.
    let window = run1
        .path
        .default_jump_window()
        .max(run2.path.default_jump_window());
    let jumps1 = run1.path.jump_events(window, run1.jump_floor());
    let jumps2 = run2.path.jump_events(window, run2.jump_floor());
    let matched = |a: &[(T, T)], b: &[(T, T)]| {
        a.iter()
            .all(|(t1, _)| b.iter().any(|(t2, _)| (*t1 - *t2).abs() <= align_tol))
    };
    let aligned = matched(&jumps1, &jumps2) && matched(&jumps2, &jumps1);

    // Field comparison on the core box (the middle half of the domain),
    // skipping snapshots taken within the alignment window of any jump.
    let (ga, gb) = run1.grid.bounds(0);
    let center = (ga + gb) / real(2.0);
    let quarter = (gb - ga) / real(4.0);
    let mut sup_u = T::zero();
    for snap in &run1.snapshots {
        let near_jump = jumps1
            .iter()
            .chain(jumps2.iter())
            .any(|(tj, _)| (*tj - snap.time).abs() <= align_tol);
        if near_jump {
            continue;
        }
        let other = run2.snapshot_at(snap.time);
        if (other.time - snap.time).abs() > align_tol.max(horizon * real(1e-9)) {
            continue;
        }
        for k in 0..snap.values.len() {
            let x = snap.grid.position(k)[0];
            if (x - center).abs() <= quarter {
                let v2 = interpolate(other, &[x])?;
                sup_u = sup_u.max((snap.values[k] - v2).abs());
            }
        }
    }

    let comparison = RouteComparison {
        l1_multiplier: as_f64(l1),
        sup_u_core: as_f64(sup_u),
        jumps_1: jumps1.iter().map(|(t, _)| as_f64(*t)).collect(),
        jumps_2: jumps2.iter().map(|(t, _)| as_f64(*t)).collect(),
        jumps_aligned: aligned,
        alignment_tol: as_f64(align_tol),
    };

    let label = format!("{}-vs-{}", run1.route, run2.route);
    let entries = vec![
        CheckEntry {
            name: format!("route-agreement-multiplier ({label})"),
            passed: Some(l1 <= horizon * real(5e-2)),
            tolerance: as_f64(horizon * real::<T>(5e-2)),
            witness_time: f64::NAN,
            witness_position: f64::NAN,
            witness_value: as_f64(l1),
            details: "L1(0,T) distance between multiplier paths".to_string(),
        },
        CheckEntry {
            name: format!("route-agreement-jumps ({label})"),
            passed: Some(aligned),
            tolerance: as_f64(align_tol),
            witness_time: comparison.jumps_1.first().copied().unwrap_or(f64::NAN),
            witness_position: f64::NAN,
            witness_value: (comparison.jumps_1.len() as f64) - (comparison.jumps_2.len() as f64),
            details: format!(
                "jump times {:?} vs {:?}",
                comparison.jumps_1, comparison.jumps_2
            ),
        },
    ];
    Ok((comparison, entries))
}

fn max_step<T: Real>(run: &RunResult<T>) -> T {
    run.path
        .t_bounds
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(T::zero(), |a, b| a.max(b))
}

/// Averaged multiplier-sensitivity weight along a trajectory:
/// phi(s) = integral over theta of dL/dI((1-theta) I1(s) + theta I2(s),
/// gamma(s), gamma_dot(s)), by fixed 16-point Gauss-Legendre quadrature.
#[derive(Debug, Clone)]
pub struct SensitivityWeights<T: Real> {
    /// (s, phi(s)) per trajectory interval.
    pub samples: Vec<(T, T)>,
    pub min: T,
}

/// 16-point Gauss-Legendre nodes/weights on [-1, 1].
const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_230,
    0.458_016_777_657_227_386_342,
    0.617_876_244_402_643_748_447,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_880,
    0.944_575_023_073_232_576_078,
    0.989_400_934_991_649_932_596,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_810,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

pub fn sensitivity_weights<T: Real>(
    traj: &Trajectory<T>,
    path1: &MultiplierPath<T>,
    path2: &MultiplierPath<T>,
    model: &ModelSpec<T>,
) -> Result<SensitivityWeights<T>> {
    let mut samples = Vec::with_capacity(traj.velocities.len());
    let mut min = T::infinity();
    for k in 0..traj.velocities.len() {
        let s = (traj.times[k] + traj.times[k + 1]) / real(2.0);
        let i1 = path1.value_at(s);
        let i2 = path2.value_at(s);
        let x = (traj.positions[k] + traj.positions[k + 1]) / real(2.0);
        let v = traj.velocities[k];
        let mut phi = T::zero();
        for j in 0..8 {
            for sign in [-1.0, 1.0] {
                let theta = real::<T>(0.5) + real::<T>(0.5 * sign * GL16_NODES[j]);
                let w = real::<T>(0.5 * GL16_WEIGHTS[j]);
                let i_mix = (T::one() - theta) * i1 + theta * i2;
                phi = phi + w * model.eval_lagrangian(i_mix, &[x], &[v])?.d_i;
            }
        }
        min = min.min(phi);
        samples.push((s, phi));
    }
    Ok(SensitivityWeights { samples, min })
}

/// Travel-cost lower bound: u(t, x) >= min(|x - c|/2, ring minimum of g at
/// radius |x - c|/2) - C t at every snapshot node, with the rate constant C
/// estimated by the domain truncation rule and c the argmin of g.
pub fn lower_bound_check<T: Real>(
    run: &RunResult<T>,
    g: &dyn Fn(T) -> T,
    c_rate: T,
    center: T,
    tol: T,
) -> CheckEntry {
    let grid = &run.grid;
    let n = grid.n_cells(0);
    // Ring minima of g over the grid, by decreasing radius.
    let radius = |k: usize| (grid.node_coord(0, k) - center).abs();
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| radius(b).partial_cmp(&radius(a)).unwrap());
    let g_vals: Vec<T> = (0..=n).map(|k| g(grid.node_coord(0, k))).collect();

    let ring_min_at = |r: T| -> T {
        let mut m = T::infinity();
        for k in 0..=n {
            if radius(k) >= r {
                m = m.min(g_vals[k]);
            }
        }
        m
    };

    let mut worst = T::infinity();
    let mut witness = (T::zero(), T::zero());
    for snap in &run.snapshots {
        for k in 0..=n {
            let x = grid.node_coord(0, k);
            let r_half = radius(k) / real(2.0);
            let bound = r_half.min(ring_min_at(r_half)) - c_rate * snap.time;
            let slack = snap.values[k] - bound;
            if slack < worst {
                worst = slack;
                witness = (snap.time, x);
            }
        }
    }
    CheckEntry {
        name: "travel-cost-lower-bound".to_string(),
        passed: Some(worst >= -tol),
        tolerance: as_f64(tol),
        witness_time: as_f64(witness.0),
        witness_position: as_f64(witness.1),
        witness_value: as_f64(worst),
        details: format!("min slack of u - bound with rate C = {}", as_f64(c_rate)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, GridSpec};
    use crate::model::ModelSpec;
    use crate::multiplier::{ConstraintSolve, MultiplierPath, RunParams};
    use approx::assert_abs_diff_eq;

    fn path_of(values: Vec<f64>, dt: f64) -> MultiplierPath<f64> {
        let n = values.len();
        MultiplierPath {
            t_bounds: (0..=n).map(|k| k as f64 * dt).collect(),
            values,
            residuals: vec![0.0; n],
            iterations: vec![1; n],
        }
    }

    #[test]
    fn reversed_path_fails_pessimization_with_witness() {
        let path = path_of(vec![1.0, 0.5], 0.1);
        let entry = check_pessimization(&path, 1e-8, true);
        assert_eq!(entry.passed, Some(false));
        assert_abs_diff_eq!(entry.witness_value, -0.5);
        assert_abs_diff_eq!(entry.witness_time, 0.1);
    }

    #[test]
    fn constant_path_passes_and_inapplicable_is_not_failed() {
        let path = path_of(vec![1.0; 20], 0.05);
        assert_eq!(check_pessimization(&path, 1e-8, true).passed, Some(true));
        assert_eq!(check_pessimization(&path, 1e-8, false).passed, None);
    }

    #[test]
    fn identical_runs_compare_at_zero_distance() {
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-2.5, 2.5, 128).unwrap();
        let params = RunParams {
            scenario: "quadratic".to_string(),
            initial: Field::from_fn(&grid, 0.0, |x| x[0] * x[0]),
            horizon: 0.05,
            snapshot_times: vec![0.05],
            solve: ConstraintSolve::default(),
            keep_fields: false,
        };
        let run =
            crate::fd::run_fd(&params, &model, crate::fd::FdScheme::UpwindConvex).unwrap();
        let (cmp, entries) = compare_runs(&run, &run).unwrap();
        assert_abs_diff_eq!(cmp.l1_multiplier, 0.0);
        assert_abs_diff_eq!(cmp.sup_u_core, 0.0);
        assert!(cmp.jumps_aligned);
        assert!(entries.iter().all(|e| e.passed == Some(true)));
    }

    #[test]
    fn mismatched_scenarios_are_rejected() {
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-2.5, 2.5, 64).unwrap();
        let mk = |name: &str| RunParams {
            scenario: name.to_string(),
            initial: Field::from_fn(&grid, 0.0, |x| x[0] * x[0]),
            horizon: 0.02,
            snapshot_times: vec![],
            solve: ConstraintSolve::default(),
            keep_fields: false,
        };
        let a = crate::fd::run_fd(&mk("one"), &model, crate::fd::FdScheme::UpwindConvex)
            .unwrap();
        let b = crate::fd::run_fd(&mk("two"), &model, crate::fd::FdScheme::UpwindConvex)
            .unwrap();
        assert!(matches!(
            compare_runs(&a, &b),
            Err(Error::ScenarioMismatch(_))
        ));
    }

    #[test]
    fn equal_paths_give_the_pointwise_sensitivity() {
        // With I1 = I2 the quadrature integrand is constant in theta, so
        // phi(s) = dL/dI exactly; for the quadratic family that is 1.
        let model = ModelSpec::<f64>::quadratic_example();
        let path = path_of(vec![1.0; 10], 0.02);
        let traj = Trajectory {
            times: (0..=10).map(|k| k as f64 * 0.02).collect(),
            positions: vec![0.0; 11],
            velocities: vec![0.0; 10],
            feet_velocities: vec![0.0; 10],
            gradient_gaps: vec![0.0; 10],
            action: 0.0,
            bv_velocity: 0.0,
            endpoint: 0.0,
            end_time: 0.2,
            grid_spacing: 0.01,
        };
        let w = sensitivity_weights(&traj, &path, &path, &model).unwrap();
        for (_, phi) in &w.samples {
            assert_abs_diff_eq!(*phi, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(w.min, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lower_bound_holds_at_time_zero_by_construction() {
        let model = ModelSpec::<f64>::quadratic_example();
        let grid = GridSpec::new_1d(-2.5, 2.5, 128).unwrap();
        let params = RunParams {
            scenario: "quadratic".to_string(),
            initial: Field::from_fn(&grid, 0.0, |x| x[0] * x[0]),
            horizon: 0.0,
            snapshot_times: vec![],
            solve: ConstraintSolve::default(),
            keep_fields: false,
        };
        let run =
            crate::fd::run_fd(&params, &model, crate::fd::FdScheme::UpwindConvex).unwrap();
        let entry = lower_bound_check(&run, &|x| x * x, 3.5, 0.0, 1e-8);
        assert_eq!(entry.passed, Some(true));
    }
}
