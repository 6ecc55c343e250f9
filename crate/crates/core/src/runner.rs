//! Scenario orchestration: runs the requested routes, assembles diagnostics,
//! and emits CSV/JSON artifacts suitable for external plotting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{
    check_pessimization, compare_runs, lower_bound_check, pessimization_tol,
    sensitivity_weights, CheckEntry, DiagnosticsReport, RouteComparison,
};
use crate::eps::{convergence_table, run_eps, ConvergenceTable, EpsRunResult};
use crate::error::{Error, Result};
use crate::fd::run_fd;
use crate::grid::Field;
use crate::model::{check_assumptions, AssumptionReport};
use crate::multiplier::{Route, RunParams, RunResult};
use crate::real::{as_f64, real, Real};
use crate::scenario::{build_scenario, Scenario, ScenarioConfig};
use crate::sl::{backtrack_trajectory, euler_lagrange_residual, run_sl, Trajectory};

/// Command-line level overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub output_dir: Option<PathBuf>,
    /// Grid-refinement multiplier: n -> k n, fixed step sizes -> dt / k.
    pub refine: Option<u32>,
    /// Route filter: keep only the listed routes.
    pub routes: Option<Vec<Route>>,
}

#[derive(Debug, Clone, Serialize)]
struct FileEntry {
    path: String,
    kind: &'static str,
    route: Option<String>,
    time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct RouteSummary {
    route: String,
    steps: usize,
    i_first: f64,
    i_last: f64,
    i_bv: f64,
    saturated_steps: usize,
    max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
struct GridSummary {
    bounds: (f64, f64),
    n_cells: usize,
    spacing: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ToleranceSummary {
    constraint: f64,
    bracket_width: f64,
    dual: f64,
    action_factor: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TruncationSummary {
    center: f64,
    rate_constant: f64,
    margin: f64,
    bounds_overridden: bool,
}

/// Top-level report, serialized with stable key order.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    scenario: String,
    version: String,
    horizon: f64,
    grid: GridSummary,
    g_shift: f64,
    truncation: TruncationSummary,
    tolerances: ToleranceSummary,
    assumptions: AssumptionReport,
    routes: Vec<RouteSummary>,
    comparisons: Vec<RouteComparison>,
    eps_table: Option<ConvergenceTable>,
    diagnostics: DiagnosticsReport,
    files: Vec<FileEntry>,
    failed: bool,
}

pub struct ScenarioOutcome {
    pub out_dir: PathBuf,
    pub report_path: PathBuf,
    pub failed: bool,
    pub diagnostics: DiagnosticsReport,
}

fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

struct ArtifactSink {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl ArtifactSink {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(ArtifactSink { dir, files: Vec::new() })
    }

    fn write(
        &mut self,
        name: &str,
        kind: &'static str,
        route: Option<String>,
        time: Option<f64>,
        contents: &str,
    ) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            kind,
            route,
            time,
        });
        Ok(())
    }
}

fn field_csv<T: Real>(field: &Field<T>) -> String {
    let mut s = String::from("x,u\n");
    for k in 0..field.values.len() {
        let x = field.grid.position(k)[0];
        let _ = writeln!(s, "{},{}", sig17(as_f64(x)), sig17(as_f64(field.values[k])));
    }
    s
}

fn multiplier_csv<T: Real>(run_path: &crate::multiplier::MultiplierPath<T>) -> String {
    let mut s = String::from("t,I,residual,iterations\n");
    for k in 0..run_path.values.len() {
        let t_mid = (run_path.t_bounds[k] + run_path.t_bounds[k + 1]) / real::<T>(2.0);
        let _ = writeln!(
            s,
            "{},{},{},{}",
            sig17(as_f64(t_mid)),
            sig17(as_f64(run_path.values[k])),
            sig17(as_f64(run_path.residuals[k])),
            run_path.iterations[k]
        );
    }
    s
}

fn trajectory_csv<T: Real>(traj: &Trajectory<T>) -> String {
    let mut s = String::from("s,gamma,gamma_dot\n");
    for k in 0..traj.velocities.len() {
        let _ = writeln!(
            s,
            "{},{},{}",
            sig17(as_f64(traj.times[k])),
            sig17(as_f64(traj.positions[k])),
            sig17(as_f64(traj.velocities[k]))
        );
    }
    let n = traj.positions.len() - 1;
    let _ = writeln!(
        s,
        "{},{},{}",
        sig17(as_f64(traj.times[n])),
        sig17(as_f64(traj.positions[n])),
        sig17(as_f64(*traj.velocities.last().unwrap_or(&T::zero())))
    );
    s
}

fn diagnostics_csv(report: &DiagnosticsReport) -> String {
    let mut s = String::from("check,passed,tolerance,witness_time,witness_position,witness_value\n");
    for e in &report.entries {
        let passed = match e.passed {
            Some(true) => "true",
            Some(false) => "false",
            None => "n/a",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.name,
            passed,
            sig17(e.tolerance),
            sig17(e.witness_time),
            sig17(e.witness_position),
            sig17(e.witness_value)
        );
    }
    s
}

fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut s = String::from("eps,l1_i,sup_abs_min_u,sup_u_core,order_l1,order_min_u\n");
    for r in &table.rows {
        let opt = |o: Option<f64>| o.map(sig17).unwrap_or_else(|| "".to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            sig17(r.eps),
            sig17(r.l1_i),
            sig17(r.sup_abs_min_u),
            sig17(r.sup_u_core),
            opt(r.order_l1),
            opt(r.order_min_u)
        );
    }
    s
}

fn route_summary<T: Real>(run: &RunResult<T>) -> RouteSummary {
    RouteSummary {
        route: run.route.to_string(),
        steps: run.path.len(),
        i_first: run.path.values.first().map(|&v| as_f64(v)).unwrap_or(f64::NAN),
        i_last: run.path.values.last().map(|&v| as_f64(v)).unwrap_or(f64::NAN),
        i_bv: as_f64(run.path.bv()),
        saturated_steps: run.saturated_steps,
        max_residual: run
            .path
            .residuals
            .iter()
            .map(|r| as_f64(r.abs()))
            .fold(0.0, f64::max),
    }
}

/// Pinned envelope constant for the Euler-Lagrange residual check:
/// residual <= EL_RESIDUAL_C * (dt + h) on smooth scenarios.
pub const EL_RESIDUAL_C: f64 = 25.0;

/// Number of backtracked endpoints for trajectory diagnostics.
pub const N_TRAJECTORIES: usize = 21;

/// Executes one scenario end to end. Returns the artifact locations and the
/// overall pass/fail of the diagnostics; route errors surface as `Err`.
pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path, overrides: &RunOverrides) -> Result<ScenarioOutcome> {
    let mut cfg = cfg.clone();
    if let Some(k) = overrides.refine {
        if k == 0 {
            return Err(Error::Config("refine: must be >= 1".to_string()));
        }
        cfg.grid.n *= k as usize;
        if let Some(dt) = cfg.sl.dt {
            cfg.sl.dt = Some(dt / k as f64);
        } else {
            cfg.sl.dt = Some(cfg.horizon / 400.0 / k as f64);
        }
    }
    if let Some(filter) = &overrides.routes {
        cfg.routes.retain(|r| filter.contains(r));
        if cfg.routes.is_empty() {
            return Err(Error::Config(
                "routes: the route filter removed every route".to_string(),
            ));
        }
    }

    let scenario: Scenario<f64> = build_scenario(&cfg, base_dir)?;
    if scenario.routes.contains(&Route::Eps)
        && !scenario.routes.iter().any(|r| matches!(r, Route::Fd | Route::Sl))
    {
        return Err(Error::Config(
            "routes: the eps route needs fd or sl in the list as reference".to_string(),
        ));
    }

    // Assumption gate: hard failures block time stepping.
    let assumptions = check_assumptions(&scenario.model, &scenario.assumption_box)?;
    let hard: Vec<String> = assumptions
        .hard_failures()
        .iter()
        .map(|e| e.name.to_string())
        .collect();
    if !hard.is_empty() {
        return Err(Error::AssumptionGate(format!(
            "model fails {} on the validity box",
            hard.join(", ")
        )));
    }
    let rest_min_ok = assumptions.passed("rest-velocity-minimum") == Some(true);

    let params = RunParams {
        scenario: scenario.name.clone(),
        initial: scenario.initial_field.clone(),
        horizon: scenario.horizon,
        snapshot_times: scenario.snapshot_times.clone(),
        solve: scenario.solve,
        keep_fields: false,
    };

    let mut fd_run: Option<RunResult<f64>> = None;
    let mut sl_run: Option<RunResult<f64>> = None;
    let mut eps_runs: Vec<EpsRunResult<f64>> = Vec::new();
    for route in &scenario.routes {
        match route {
            Route::Fd => {
                fd_run = Some(run_fd(&params, &scenario.model, scenario.fd_scheme)?);
            }
            Route::Sl => {
                sl_run = Some(run_sl(&params, &scenario.model, scenario.sl_dt)?);
            }
            Route::Eps => {
                for &e in &scenario.eps_values {
                    let psi = &scenario.psi;
                    eps_runs.push(run_eps(
                        &params,
                        &scenario.model,
                        e,
                        &|x| psi.eval(x),
                    )?);
                }
            }
        }
    }

    // ---- Diagnostics -----------------------------------------------------
    let mut diag = DiagnosticsReport::default();
    let g = scenario.g();

    for run in [fd_run.as_ref(), sl_run.as_ref()].into_iter().flatten() {
        let mut entry = check_pessimization(&run.path, pessimization_tol(run), rest_min_ok);
        entry.name = format!("pessimization ({})", run.route);
        diag.push(entry);

        let mut entry = lower_bound_check(
            run,
            &g,
            scenario.truncation.c_estimate,
            scenario.truncation.center,
            scenario.solve.tol_constraint,
        );
        entry.name = format!("travel-cost-lower-bound ({})", run.route);
        diag.push(entry);
    }

    let mut comparisons = Vec::new();
    if let (Some(a), Some(b)) = (fd_run.as_ref(), sl_run.as_ref()) {
        let (cmp, entries) = compare_runs(a, b)?;
        comparisons.push(cmp);
        for e in entries {
            diag.push(e);
        }
    }

    // Trajectory diagnostics from the semi-Lagrangian run.
    let mut trajectories: Vec<Trajectory<f64>> = Vec::new();
    if let Some(run) = sl_run.as_ref() {
        let (ga, gb) = run.grid.bounds(0);
        let center = 0.5 * (ga + gb);
        let quarter = 0.25 * (gb - ga);
        let h = run.grid.spacing(0);
        let dt_max = run
            .path
            .t_bounds
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        let tol_action = scenario.action_factor * (dt_max + h);

        let final_field = run.snapshot_at(scenario.horizon);
        let mut worst_action: f64 = 0.0;
        let mut worst_el: f64 = 0.0;
        let mut worst_bv_ratio: f64 = 0.0;
        let mut worst_mean_v: f64 = 0.0;
        for j in 0..N_TRAJECTORIES {
            let x = center - quarter
                + 2.0 * quarter * (j as f64) / ((N_TRAJECTORIES - 1) as f64);
            let traj = backtrack_trajectory(run, scenario.horizon, x, &scenario.model)?;
            let u_end = crate::grid::interpolate(final_field, &[traj.endpoint])?;
            worst_action = worst_action.max((traj.action - u_end).abs());
            let el = euler_lagrange_residual(
                &traj,
                &run.path,
                &scenario.model,
                run.jump_floor(),
            )?;
            worst_el = worst_el.max(el);
            let denom = traj.end_time + run.path.bv_up_to(traj.end_time);
            if denom > 0.0 {
                worst_bv_ratio = worst_bv_ratio.max(traj.bv_velocity / denom);
            }
            worst_mean_v = worst_mean_v.max(traj.mean_abs_velocity());
            trajectories.push(traj);
        }

        diag.push(CheckEntry {
            name: "action-consistency (sl)".to_string(),
            passed: Some(worst_action <= tol_action),
            tolerance: tol_action,
            witness_time: as_f64(scenario.horizon),
            witness_position: f64::NAN,
            witness_value: worst_action,
            details: "max |trajectory action - u(T, x)| over backtracked endpoints".to_string(),
        });
        diag.push(CheckEntry {
            name: "velocity-saturation (sl)".to_string(),
            passed: Some(run.saturated_steps == 0),
            tolerance: 0.0,
            witness_time: f64::NAN,
            witness_position: f64::NAN,
            witness_value: run.saturated_steps as f64,
            details: "steps whose argmin hit the velocity search radius".to_string(),
        });
        let el_tol = EL_RESIDUAL_C * (dt_max + h);
        diag.push(CheckEntry {
            name: "euler-lagrange-residual (sl)".to_string(),
            passed: Some(worst_el <= el_tol),
            tolerance: el_tol,
            witness_time: f64::NAN,
            witness_position: f64::NAN,
            witness_value: worst_el,
            details: "sup residual over backtracked trajectories, jump steps excluded"
                .to_string(),
        });
        diag.push(CheckEntry {
            name: "velocity-bv-ratio (sl)".to_string(),
            passed: Some(worst_bv_ratio.is_finite()),
            tolerance: f64::NAN,
            witness_time: f64::NAN,
            witness_position: f64::NAN,
            witness_value: worst_bv_ratio,
            details: "max [gamma_dot]_BV / (t + [I]_BV); stability is checked across \
                      resolutions by the acceptance suite"
                .to_string(),
        });
        diag.push(CheckEntry {
            name: "mean-velocity-bound (sl)".to_string(),
            passed: Some(worst_mean_v.is_finite()),
            tolerance: f64::NAN,
            witness_time: f64::NAN,
            witness_position: f64::NAN,
            witness_value: worst_mean_v,
            details: "max (1/t) integral |gamma_dot| over backtracked endpoints".to_string(),
        });

        // Averaged multiplier-sensitivity weights along the argmin curve.
        let (_, argmin_node) = final_field.min_with_index();
        let x_arg = final_field.grid.position(argmin_node)[0];
        let traj = backtrack_trajectory(run, scenario.horizon, x_arg, &scenario.model)?;
        let other = fd_run.as_ref().map(|r| &r.path).unwrap_or(&run.path);
        let w = sensitivity_weights(&traj, other, &run.path, &scenario.model)?;
        diag.push(CheckEntry {
            name: "sensitivity-weight-positivity".to_string(),
            passed: Some(w.min > 0.0),
            tolerance: 0.0,
            witness_time: w
                .samples
                .iter()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|s| s.0)
                .unwrap_or(f64::NAN),
            witness_position: f64::NAN,
            witness_value: w.min,
            details: "min averaged dL/dI along the backtracked argmin trajectory".to_string(),
        });
    }

    let eps_table = if eps_runs.is_empty() {
        None
    } else {
        let reference = fd_run
            .as_ref()
            .or(sl_run.as_ref())
            .expect("validated: eps route has a reference");
        let table = convergence_table(&eps_runs, reference)?;
        let monotone = table
            .rows
            .windows(2)
            .all(|w| w[1].l1_i <= w[0].l1_i);
        diag.push(CheckEntry {
            name: "vanishing-regularization (eps)".to_string(),
            passed: Some(monotone),
            tolerance: f64::NAN,
            witness_time: f64::NAN,
            witness_position: f64::NAN,
            witness_value: table.rows.last().map(|r| r.l1_i).unwrap_or(f64::NAN),
            details: "L1 multiplier error decreasing along the eps list".to_string(),
        });
        Some(table)
    };

    // ---- Artifacts -------------------------------------------------------
    let out_dir = overrides
        .output_dir
        .clone()
        .unwrap_or_else(|| scenario.output_dir.clone());
    let mut sink = ArtifactSink::new(out_dir.clone())?;

    let mut route_summaries = Vec::new();
    for run in [fd_run.as_ref(), sl_run.as_ref()].into_iter().flatten() {
        let route = run.route.to_string();
        sink.write(
            &format!("multiplier_{route}.csv"),
            "multiplier-path",
            Some(route.clone()),
            None,
            &multiplier_csv(&run.path),
        )?;
        for (k, snap) in run.snapshots.iter().enumerate() {
            sink.write(
                &format!("u_{route}_{k}.csv"),
                "field-snapshot",
                Some(route.clone()),
                Some(as_f64(snap.time)),
                &field_csv(snap),
            )?;
        }
        route_summaries.push(route_summary(run));
    }
    for (j, traj) in trajectories.iter().enumerate() {
        sink.write(
            &format!("trajectory_sl_{j:02}.csv"),
            "trajectory",
            Some("sl".to_string()),
            Some(as_f64(traj.endpoint)),
            &trajectory_csv(traj),
        )?;
    }
    for run in &eps_runs {
        let tag = format!("{}", run.eps);
        sink.write(
            &format!("multiplier_eps_{tag}.csv"),
            "multiplier-path",
            Some("eps".to_string()),
            None,
            &multiplier_csv(&run.path),
        )?;
        for (k, snap) in run.snapshots.iter().enumerate() {
            sink.write(
                &format!("u_eps_{tag}_{k}.csv"),
                "field-snapshot",
                Some("eps".to_string()),
                Some(as_f64(snap.time)),
                &field_csv(snap),
            )?;
        }
    }
    if let Some(table) = &eps_table {
        sink.write(
            "convergence.csv",
            "eps-convergence",
            Some("eps".to_string()),
            None,
            &convergence_csv(table),
        )?;
    }
    sink.write(
        "diagnostics.json",
        "diagnostics",
        None,
        None,
        &serde_json::to_string_pretty(&diag).expect("diagnostics serialize"),
    )?;
    sink.write(
        "diagnostics.csv",
        "diagnostics",
        None,
        None,
        &diagnostics_csv(&diag),
    )?;

    let failed = diag.any_failed();
    let bounds = scenario.grid.bounds(0);
    let mut files = sink.files.clone();
    files.push(FileEntry {
        path: "report.json".to_string(),
        kind: "report",
        route: None,
        time: None,
    });
    let report = Report {
        scenario: scenario.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        horizon: as_f64(scenario.horizon),
        grid: GridSummary {
            bounds: (as_f64(bounds.0), as_f64(bounds.1)),
            n_cells: scenario.grid.n_cells(0),
            spacing: as_f64(scenario.grid.spacing(0)),
        },
        g_shift: as_f64(scenario.g_shift),
        truncation: TruncationSummary {
            center: as_f64(scenario.truncation.center),
            rate_constant: as_f64(scenario.truncation.c_estimate),
            margin: as_f64(scenario.truncation.margin),
            bounds_overridden: cfg.grid.bounds.is_some(),
        },
        tolerances: ToleranceSummary {
            constraint: as_f64(scenario.solve.tol_constraint),
            bracket_width: as_f64(scenario.solve.bracket_width),
            dual: as_f64(scenario.tol_dual),
            action_factor: as_f64(scenario.action_factor),
        },
        assumptions,
        routes: route_summaries,
        comparisons,
        eps_table,
        diagnostics: diag.clone(),
        files,
        failed,
    };
    let report_path = out_dir.join("report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).expect("report serialize"),
    )?;

    Ok(ScenarioOutcome {
        out_dir,
        report_path,
        failed,
        diagnostics: diag,
    })
}
