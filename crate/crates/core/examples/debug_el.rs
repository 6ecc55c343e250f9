use chj_core::scenario::{builtin, build_scenario};
use chj_core::sl::{backtrack_trajectory, euler_lagrange_residual, run_sl};
use chj_core::multiplier::RunParams;

fn main() {
    let cfg = builtin("jump").unwrap();
    let s: chj_core::scenario::Scenario<f64> = build_scenario(&cfg, std::path::Path::new(".")).unwrap();
    let params = RunParams {
        scenario: s.name.clone(),
        initial: s.initial_field.clone(),
        horizon: s.horizon,
        snapshot_times: s.snapshot_times.clone(),
        solve: s.solve,
        keep_fields: true,
    };
    let run = run_sl(&params, &s.model, s.sl_dt).unwrap();
    println!("jumps: {:?}", run.path.jumps(run.jump_floor()));
    let (ga, gb) = run.grid.bounds(0);
    let center = 0.5 * (ga + gb);
    let quarter = 0.25 * (gb - ga);
    for j in 0..21 {
        let x = center - quarter + 2.0 * quarter * (j as f64) / 20.0;
        let traj = backtrack_trajectory(&run, s.horizon, x, &s.model).unwrap();
        let el = euler_lagrange_residual(&traj, &run.path, &s.model, run.jump_floor()).unwrap();
        // where's the worst junction?
        let mut worst_t = f64::NAN;
        let mut worst = 0.0f64;
        let n = traj.velocities.len();
        let mid = |k: usize| 0.5 * (traj.times[k] + traj.times[k + 1]);
        for k in 1..n {
            let dt_bar = 0.5 * (traj.times[k + 1] - traj.times[k - 1]);
            let i_k = run.path.value_at(mid(k));
            let p_k = s.model.eval_lagrangian(i_k, &[0.5 * (traj.positions[k] + traj.positions[k + 1])], &[traj.velocities[k]]).unwrap().d_pv[0];
            let i_km = run.path.value_at(mid(k - 1));
            let p_km = s.model.eval_lagrangian(i_km, &[0.5 * (traj.positions[k - 1] + traj.positions[k])], &[traj.velocities[k - 1]]).unwrap().d_pv[0];
            let v_bar = 0.5 * (traj.velocities[k - 1] + traj.velocities[k]);
            let d_x = s.model.eval_lagrangian(i_k, &[traj.positions[k]], &[v_bar]).unwrap().d_x[0];
            let r = ((p_k - p_km) / dt_bar - d_x).abs();
            if r > worst { worst = r; worst_t = traj.times[k]; }
        }
        println!("endpoint {:+.3}: el={:.4e} worst_raw={:.3e} at t={:.3} gamma(0)={:+.3}", x, el, worst, worst_t, traj.positions[0]);
    }
}
