//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semiactive_cli::config::{self, ControllerKind, Model};
use semiactive_cli::report::{compare, SummaryRow};
use semiactive_cli::runner::{self, ControllerRun};
use semiactive_core::controllers::{clip_damping, pdd_branch, HinfSettings, PddBranch, PddVariant, DEFAULT_EPS_V};
use semiactive_core::lti::linalg::spectral_abscissa;
use semiactive_core::lti::riccati::relative_residual;
use semiactive_core::lti::{hinf_norm, lft_closed_loop, solve_care, StateSpace};
use semiactive_core::metrics::rms;
use semiactive_core::road::{per_axle_profiles, RoadProfile, RoadSpec};
use semiactive_core::sim::{self, corner_command, rk4_step, CornerSignals, SimConfig, Strategy};
use semiactive_core::vehicle::{CornerParams, FullVehicleParams, QuarterCarParams};

struct Verdict {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn report(v: &Verdict) {
    println!("criterion {:>2} {:<5} {}: {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.title, v.detail);
}

fn builtin(name: &str) -> (config::Scenario, Vec<ControllerRun>, f64) {
    let scenario = config::load(name).unwrap();
    let start = Instant::now();
    let runs = runner::simulate(&scenario, None).unwrap();
    (scenario, runs, start.elapsed().as_secs_f64())
}

fn get<'a>(runs: &'a [ControllerRun], name: &str) -> &'a ControllerRun {
    runs.iter().find(|r| r.name == name).unwrap()
}

/// True when `values` (in the listed order) is strictly increasing.
fn ordered(runs: &[ControllerRun], order: &[&str], metric: fn(&ControllerRun) -> f64) -> (bool, String) {
    let values: Vec<f64> = order.iter().map(|n| metric(get(runs, n))).collect();
    let text = order.iter().zip(&values).map(|(n, v)| format!("{n} {v:.6}")).collect::<Vec<_>>().join(" < ");
    (values.windows(2).all(|w| w[0] < w[1]), text)
}

fn ordering(id: usize, title: &'static str, runs: &[ControllerRun], order: &[&str], secs: f64, limit: f64) -> Verdict {
    let (rms_ok, rms_text) = ordered(runs, order, |r| r.report.rms_accel);
    let (pow_ok, pow_text) = ordered(runs, order, |r| r.report.absorbed_power_final);
    let fast = secs < limit;
    Verdict {
        id,
        title,
        pass: rms_ok && pow_ok && fast,
        detail: format!(
            "rms [{}] {rms_text}; power [{}] {pow_text}; runtime {secs:.2} s (limit {limit} s)",
            if rms_ok { "ok" } else { "violated" },
            if pow_ok { "ok" } else { "violated" },
        ),
    }
}

fn chattering(runs: &[ControllerRun]) -> Verdict {
    let (add, pdd) = (get(runs, "add").report.switch_count, get(runs, "pdd").report.switch_count);
    Verdict { id: 3, title: "chattering", pass: add > pdd, detail: format!("switches add {add} > pdd {pdd}") }
}

fn pdd_neutralization(scenario: &config::Scenario, runs: &[ControllerRun]) -> Verdict {
    let Model::Quarter { params, .. } = &scenario.model else { unreachable!() };
    let t = &get(runs, "pdd").traj;
    let (mut active, mut worst) = (0, 0.0f64);
    for k in 0..t.len() {
        if pdd_branch(t.x_def[k][0], t.v_def[k][0], &params.corner, PddVariant::DissipativityConsistent)
            == PddBranch::Cancel
        {
            active += 1;
            worst = worst.max(t.accel[k].abs());
        }
    }
    Verdict {
        id: 4,
        title: "PDD neutralization",
        pass: active > 0 && worst <= 1e-9,
        detail: format!("{active} cancelling samples, max |accel| {worst:.3e} (limit 1e-9)"),
    }
}

fn care_oracle() -> Verdict {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let x = solve_care(&one(-1.0), &one(1.0), &one(1.0), &one(1.0)).unwrap()[(0, 0)];
    let scalar_err = (x - (2f64.sqrt() - 1.0)).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut solved = 0;
    for _ in 0..100 {
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let q = DMatrix::identity(4, 4);
        if let Ok(x) = solve_care(&a, &b, &q, &DMatrix::identity(2, 2)) {
            let g = &b * b.transpose();
            if spectral_abscissa(&(&a - &g * &x)).unwrap() < 0.0 {
                solved += 1;
            }
            worst = worst.max(relative_residual(&a, &g, &q, &x));
        }
    }
    Verdict {
        id: 5,
        title: "CARE oracle",
        pass: scalar_err <= 1e-12 && solved == 100 && worst <= 1e-8,
        detail: format!("scalar |X - (sqrt2 - 1)| {scalar_err:.2e}; {solved}/100 random 4x4 stabilizing, max residual {worst:.2e}"),
    }
}

fn norm_oracle(scenario: &config::Scenario) -> Verdict {
    let lag = StateSpace::new(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 1),
    )
    .unwrap();
    let lag_err = (hinf_norm(&lag, 1e-9).unwrap() - 1.0).abs();
    let settings = HinfSettings::default();
    let s = runner::synthesize(&scenario.model, &settings, None).unwrap();
    let cl = lft_closed_loop(&s.design.plant, &s.controller.k).unwrap();
    let stable = cl.is_stable().unwrap();
    let norm = hinf_norm(&cl, 1e-9).unwrap();
    let gamma = s.controller.gamma_achieved;
    Verdict {
        id: 6,
        title: "H-infinity norm oracle",
        pass: lag_err <= 1e-6 && stable && norm <= gamma * (1.0 + 1e-6),
        detail: format!(
            "lag norm error {lag_err:.2e}; quarter-car closed loop norm {norm:.9} vs gamma {gamma:.9}, stable {stable}"
        ),
    }
}

fn integrator(scenario: &config::Scenario) -> Verdict {
    let err = |dt: f64| {
        let mut x = 1.0;
        for k in 0..(1.0 / dt).round() as usize {
            x = rk4_step(|_, x: &f64| Ok(-x), &x, k as f64 * dt, dt).unwrap();
        }
        (x - (-1.0f64).exp()).abs()
    };
    let ratio = err(0.02) / err(0.01);

    // halve dt, keep the controller's update rate, compare on common samples
    let coarse = scenario.sim;
    let fine = SimConfig { dt: coarse.dt / 2.0, controller_period: 2 * coarse.controller_period, ..coarse };
    let plain = SimConfig { dt: coarse.dt / 2.0, ..coarse };
    let roads = runner::road_profiles(&scenario.model).unwrap();
    let (mut worst, mut worst_plain) = (0.0f64, 0.0f64);
    let mut plain_text = vec![];
    for spec in &scenario.controllers {
        let strategy = runner::strategy(&scenario.model, &spec.kind, None).unwrap();
        let run = |cfg: &SimConfig| runner::simulate_one(&scenario.model, &strategy, &roads, cfg).unwrap();
        let a = rms(&run(&coarse).accel).unwrap();
        let common: Vec<f64> = run(&fine).accel.iter().step_by(2).copied().collect();
        let halved: Vec<f64> = run(&plain).accel.iter().step_by(2).copied().collect();
        worst = worst.max((rms(&common).unwrap() / a - 1.0).abs());
        let change = (rms(&halved).unwrap() / a - 1.0).abs();
        worst_plain = worst_plain.max(change);
        plain_text.push(format!("{} {change:.1e}", spec.name));
    }
    println!(
        "criterion  7 INFO  halving dt together with the controller update rate: relative RMS change {} (max {worst_plain:.2e})",
        plain_text.join(", ")
    );
    Verdict {
        id: 7,
        title: "integrator",
        pass: (14.0..=18.0).contains(&ratio) && worst < 1e-3,
        detail: format!(
            "RK4 error ratio {ratio:.3} on step halving; dt refinement at fixed controller rate changes RMS by at most {:.2e} (limit 1e-3)",
            worst
        ),
    }
}

fn all_strategies(model: &Model) -> Vec<(&'static str, Strategy)> {
    [
        ("passive", ControllerKind::Passive),
        ("add", ControllerKind::Add),
        ("pdd", ControllerKind::Pdd(PddVariant::DissipativityConsistent)),
        ("pdd-as-printed", ControllerKind::Pdd(PddVariant::AsPrinted)),
        ("hinf", ControllerKind::Hinf(HinfSettings::default())),
    ]
    .into_iter()
    .map(|(name, k)| (name, runner::strategy(model, &k, None).unwrap()))
    .collect()
}

fn single_axle(q: &QuarterCarParams) -> FullVehicleParams {
    FullVehicleParams {
        m_s: 2.0 * q.m_s,
        i_pitch: 1000.0,
        i_roll: 1000.0,
        axle_positions: vec![0.0],
        cg_position: 0.0,
        half_track: 0.8,
        corners: vec![q.corner; 2],
    }
}

fn physics(quarter: &[ControllerRun], full: &[ControllerRun], q: &config::Scenario, f: &config::Scenario) -> Verdict {
    let cfg = q.sim;
    let mut notes = vec![];

    let negative_power = quarter
        .iter()
        .chain(full)
        .flat_map(|r| r.traj.c_in.iter().flatten().zip(r.traj.v_def.iter().flatten()))
        .filter(|(c, v)| *c * *v * *v < 0.0)
        .count();
    notes.push(format!("negative damper power samples {negative_power}"));

    let mut nonzero_flat = vec![];
    for model in [&q.model, &f.model] {
        let n = runner::corners(model).len();
        let flat = vec![RoadProfile::flat(); n];
        for (name, s) in all_strategies(model) {
            let t = runner::simulate_one(model, &s, &flat, &cfg).unwrap();
            if t.state.iter().flatten().any(|v| *v != 0.0) || t.accel.iter().any(|a| *a != 0.0) {
                nonzero_flat.push(format!("{}:{name}", model.kind().as_str()));
            }
        }
    }
    notes.push(format!("zero-road runs with motion {nonzero_flat:?}"));

    let Model::Full { params, speed, .. } = &f.model else { unreachable!() };
    let bump = RoadProfile::from_spec(&RoadSpec::default_bump()).unwrap();
    let roads = per_axle_profiles(&bump, &bump, params, *speed).unwrap();
    let mut max_roll = 0.0f64;
    for (_, s) in all_strategies(&f.model) {
        let t = sim::run(params, &s, &roads, &cfg).unwrap();
        max_roll = t.state.iter().fold(max_roll, |m, x| m.max(x[2].abs()).max(x[17].abs()));
    }
    notes.push(format!("symmetric-road max |roll|, |roll rate| {max_roll:e}"));

    let Model::Quarter { params: qp, .. } = &q.model else { unreachable!() };
    let axle = single_axle(qp);
    let mut worst = 0.0f64;
    let local = [Strategy::Passive, Strategy::Add, Strategy::Pdd(PddVariant::DissipativityConsistent), Strategy::Pdd(PddVariant::AsPrinted)];
    for s in &local {
        let a = sim::run(qp, s, std::slice::from_ref(&bump), &cfg).unwrap();
        let b = sim::run(&axle, s, &[bump.clone(), bump.clone()], &cfg).unwrap();
        for k in 0..a.len() {
            let (x, y) = (&a.state[k], &b.state[k]);
            for (u, v) in [(x[0], y[0]), (x[1], y[5]), (x[2], y[3]), (x[2], y[4]), (x[3], y[8]), (x[3], y[9])] {
                worst = worst.max((u - v).abs());
            }
            worst = worst.max((a.accel[k] - b.accel[k]).abs());
        }
    }
    notes.push(format!("single-axle vs quarter car max deviation {worst:.2e}"));

    Verdict {
        id: 8,
        title: "physics invariants",
        pass: negative_power == 0 && nonzero_flat.is_empty() && max_roll == 0.0 && worst <= 1e-10,
        detail: notes.join("; "),
    }
}

fn improvement_arithmetic() -> Verdict {
    let row = |c: &str, rms: f64, p: f64| SummaryRow {
        scenario: "reference".into(),
        controller: c.into(),
        rms_accel: rms,
        absorbed_power_final: p,
        switch_count: 0,
    };
    let rows = vec![
        row("add", 3.764, 8.2293),
        row("pdd", 3.3885, 5.6376),
        row("hinf", 3.0487, 4.3078),
        row("passive", 5.5165, 10.4842),
    ];
    let ranked = compare(rows).unwrap();
    let top = &ranked[0];
    let (r, p) = (top.rms_improvement.unwrap(), top.power_improvement.unwrap());
    let pass = top.row.controller == "hinf"
        && ranked[1].row.controller == "pdd"
        && format!("{r:.1}") == "10.0"
        && format!("{p:.1}") == "23.6";
    Verdict {
        id: 9,
        title: "relative-improvement arithmetic",
        pass,
        detail: format!("hinf over pdd: rms {r:.2}%, absorbed power {p:.2}% (expected 10.0%, 23.6%)"),
    }
}

fn command_range() -> Verdict {
    let mut corners = vec![QuarterCarParams::paper_quarter().corner];
    corners.extend(FullVehicleParams::paper_6axle().corners.into_iter().take(3));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let strategies = [
        ("passive", Strategy::Passive),
        ("add", Strategy::Add),
        ("pdd", Strategy::Pdd(PddVariant::DissipativityConsistent)),
        ("pdd-as-printed", Strategy::Pdd(PddVariant::AsPrinted)),
    ];
    let n = 100_000;
    let inside = |c: f64, corner: &CornerParams| (corner.c_min..=corner.c_max).contains(&c);
    let mut outside = vec![];
    let sample = |rng: &mut ChaCha8Rng| {
        // include exact zeros, which sit on branch boundaries
        let mut v = [rng.random_range(-50.0..50.0), rng.random_range(-0.3..0.3), rng.random_range(-3.0..3.0)];
        for x in v.iter_mut() {
            if rng.random_bool(0.05) {
                *x = 0.0;
            }
        }
        v
    };
    for (name, s) in &strategies {
        let mut bad = 0;
        for k in 0..n {
            let corner = &corners[k % corners.len()];
            let [accel, x_def, v_def] = sample(&mut rng);
            let c = corner_command(s, corner, &CornerSignals { accel, x_def, v_def }).unwrap().c_in();
            bad += usize::from(!inside(c, corner));
        }
        outside.push(format!("{name} {bad}"));
    }
    let mut bad = 0;
    for k in 0..n {
        let corner = &corners[k % corners.len()];
        let [_, _, v_def] = sample(&mut rng);
        let f_req = rng.random_range(-2e5..2e5);
        bad += usize::from(!inside(clip_damping(f_req, v_def, corner, DEFAULT_EPS_V).c_in(), corner));
    }
    outside.push(format!("hinf-clip {bad}"));
    let pass = outside.iter().all(|s| s.ends_with(" 0"));
    Verdict {
        id: 10,
        title: "command range",
        pass,
        detail: format!("{n} random states per controller, commands outside [c_min, c_max]: {}", outside.join(", ")),
    }
}

fn main() -> ExitCode {
    let (quarter, q_runs, q_secs) = builtin("paper-quarter");
    let mut verdicts = vec![ordering(1, "quarter-car ordering", &q_runs, &["hinf", "pdd", "add", "passive"], q_secs, 10.0)];
    report(&verdicts[0]);
    let (full, f_runs, f_secs) = builtin("paper-6axle");
    let checks: Vec<Box<dyn Fn() -> Verdict>> = vec![
        Box::new(|| ordering(2, "6-axle ordering", &f_runs, &["hinf", "pdd", "passive", "add"], f_secs, 120.0)),
        Box::new(|| chattering(&q_runs)),
        Box::new(|| pdd_neutralization(&quarter, &q_runs)),
        Box::new(care_oracle),
        Box::new(|| norm_oracle(&quarter)),
        Box::new(|| integrator(&quarter)),
        Box::new(|| physics(&q_runs, &f_runs, &quarter, &full)),
        Box::new(improvement_arithmetic),
        Box::new(command_range),
    ];
    for check in checks {
        let v = check();
        report(&v);
        verdicts.push(v);
    }
    let failed: Vec<String> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id.to_string()).collect();
    println!("acceptance: {} of {} criteria pass", verdicts.len() - failed.len(), verdicts.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
