use semiactive_core::controllers::{HinfDesignModel, HinfSettings, PddBranch, PddVariant, pdd_branch};
use semiactive_core::metrics::{absorbed_power_series, rms};
use semiactive_core::road::{per_axle_profiles, RoadProfile, RoadShape, RoadSpec};
use semiactive_core::sim::{corner_command, rk4_step, run, CornerSignals, SimConfig, Strategy, Trajectory};
use semiactive_core::vehicle::{
    quarter_car_rhs, CornerParams, FullVehicleParams, QuarterCarParams, QuarterCarState,
};

fn bump() -> RoadProfile {
    RoadProfile::from_spec(&RoadSpec::default_bump()).unwrap()
}

fn quarter_hinf(p: &QuarterCarParams) -> Strategy {
    let settings = HinfSettings::default();
    let design = HinfDesignModel::quarter_car(p, &settings).unwrap();
    let controller = design.synthesize(&settings).unwrap();
    Strategy::Hinf { controller, design, eps_v: settings.eps_v }
}

fn local_strategies() -> Vec<Strategy> {
    vec![
        Strategy::Passive,
        Strategy::Add,
        Strategy::Pdd(PddVariant::DissipativityConsistent),
        Strategy::Pdd(PddVariant::AsPrinted),
    ]
}

fn max_abs(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn rk4_is_fourth_order() {
    let err = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let mut x = 1.0;
        for k in 0..steps {
            x = rk4_step(|_, x: &f64| Ok(-x), &x, k as f64 * dt, dt).unwrap();
        }
        (x - (-1.0f64).exp()).abs()
    };
    let ratio = err(0.02) / err(0.01);
    assert!((14.0..=18.0).contains(&ratio), "{ratio}");
}

#[test]
fn energy_decays_at_damper_rate() {
    let p = QuarterCarParams::paper_quarter();
    let c = 7000.0;
    let dt = 1e-4;
    let mut s = QuarterCarState { x_s: 0.02, v_s: 0.1, x_u: -0.005, v_u: 0.3 };
    let e_start = s.energy(&p, 0.0);
    let mut lost = 0.0;
    for k in 0..20_000 {
        let e0 = s.energy(&p, 0.0);
        let next = rk4_step(|_, s: &QuarterCarState| quarter_car_rhs(&p, s, c, 0.0), &s, k as f64 * dt, dt).unwrap();
        assert!(next.energy(&p, 0.0) <= e0 + 1e-12, "step {k}");
        lost += 0.5 * dt * c * (s.v_def().powi(2) + next.v_def().powi(2));
        s = next;
    }
    let e_end = s.energy(&p, 0.0);
    assert!(e_end < 0.5 * e_start);
    assert!(((e_start - e_end) / lost - 1.0).abs() < 1e-6);
}

#[test]
fn passive_bump_dissipates() {
    let p = QuarterCarParams::paper_quarter();
    let traj = run(&p, &Strategy::Passive, &[bump()], &SimConfig::default()).unwrap();
    let energy: Vec<f64> = traj
        .state
        .iter()
        .zip(&traj.road)
        .map(|(x, r)| QuarterCarState { x_s: x[0], v_s: x[1], x_u: x[2], v_u: x[3] }.energy(&p, r[0]))
        .collect();
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    assert!(*energy.last().unwrap() < peak);
}

#[test]
fn flat_road_gives_zero_trajectory() {
    let p = QuarterCarParams::paper_quarter();
    let cfg = SimConfig { duration: 1.0, ..Default::default() };
    let mut strategies = local_strategies();
    strategies.push(quarter_hinf(&p));
    for s in &strategies {
        let traj = run(&p, s, &[RoadProfile::flat()], &cfg).unwrap();
        assert_eq!(max_abs(&traj.state), 0.0, "{}", s.name());
        assert!(traj.accel.iter().all(|a| *a == 0.0));
        assert!(absorbed_power_series(&traj).iter().all(|a| *a == 0.0));
    }
}

#[test]
fn damper_power_is_never_negative() {
    let p = QuarterCarParams::paper_quarter();
    let mut strategies = local_strategies();
    strategies.push(quarter_hinf(&p));
    for s in &strategies {
        let traj = run(&p, s, &[bump()], &SimConfig::default()).unwrap();
        for (c, v) in traj.c_in.iter().flatten().zip(traj.v_def.iter().flatten()) {
            assert!(c * v * v >= 0.0);
        }
        assert!(absorbed_power_series(&traj).iter().all(|a| *a >= 0.0));
    }
}

#[test]
fn add_with_equal_bounds_is_passive() {
    let mut p = QuarterCarParams::paper_quarter();
    p.corner.c_min = 5000.0;
    p.corner.c_max = 5000.0;
    let a = run(&p, &Strategy::Passive, &[bump()], &SimConfig::default()).unwrap();
    let b = run(&p, &Strategy::Add, &[bump()], &SimConfig::default()).unwrap();
    for (x, y) in a.state.iter().flatten().zip(b.state.iter().flatten()) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn runs_are_deterministic() {
    let p = QuarterCarParams::paper_quarter();
    let road = RoadProfile::from_spec(&RoadSpec::new(RoadShape::Random { seed: 42, class: 'C', speed: 15.0 })).unwrap();
    let again = RoadProfile::from_spec(&RoadSpec::new(RoadShape::Random { seed: 42, class: 'C', speed: 15.0 })).unwrap();
    for s in [Strategy::Add, quarter_hinf(&p)] {
        let a = run(&p, &s, std::slice::from_ref(&road), &SimConfig::default()).unwrap();
        let b = run(&p, &s, std::slice::from_ref(&again), &SimConfig::default()).unwrap();
        let bits = |t: &Trajectory| t.state.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.c_in, b.c_in);
    }
}

#[test]
fn pdd_cancels_spring_force() {
    let p = QuarterCarParams::paper_quarter();
    let traj = run(&p, &Strategy::Pdd(PddVariant::DissipativityConsistent), &[bump()], &SimConfig::default()).unwrap();
    let mut active = 0;
    for k in 0..traj.len() {
        let branch = pdd_branch(traj.x_def[k][0], traj.v_def[k][0], &p.corner, PddVariant::DissipativityConsistent);
        if branch == PddBranch::Cancel {
            active += 1;
            assert!(traj.accel[k].abs() <= 1e-9, "t = {}: {}", traj.time[k], traj.accel[k]);
        }
    }
    assert!(active > 0);
}

#[test]
fn hinf_plant_stays_bounded() {
    let p = QuarterCarParams::paper_quarter();
    let passive = run(&p, &Strategy::Passive, &[bump()], &SimConfig::default()).unwrap();
    let hinf = run(&p, &quarter_hinf(&p), &[bump()], &SimConfig::default()).unwrap();
    let limit = 10.0 * max_abs(&passive.state);
    assert!(max_abs(&hinf.state) <= limit);
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

#[test]
fn single_axle_vehicle_matches_quarter_car() {
    let q = QuarterCarParams::paper_quarter();
    let full = single_axle(&q);
    let cfg = SimConfig::default();
    for s in local_strategies() {
        let a = run(&q, &s, &[bump()], &cfg).unwrap();
        let b = run(&full, &s, &[bump(), bump()], &cfg).unwrap();
        for k in 0..a.len() {
            let (x, y) = (&a.state[k], &b.state[k]);
            // quarter [x_s, v_s, x_u, v_u]; full [heave, pitch, roll, x_u0, x_u1, heave', ..., v_u0, v_u1]
            let pairs = [(x[0], y[0]), (x[1], y[5]), (x[2], y[3]), (x[2], y[4]), (x[3], y[8]), (x[3], y[9])];
            for (u, v) in pairs {
                assert!((u - v).abs() <= 1e-10, "{} at {}", s.name(), a.time[k]);
            }
            assert!((a.accel[k] - b.accel[k]).abs() <= 1e-10);
        }
    }
}

#[test]
fn symmetric_road_never_rolls() {
    let p = FullVehicleParams::paper_6axle();
    let left = bump();
    let roads = per_axle_profiles(&left, &left, &p, 10.0).unwrap();
    let cfg = SimConfig { duration: 2.0, ..Default::default() };
    for s in local_strategies() {
        let traj = run(&p, &s, &roads, &cfg).unwrap();
        assert!(traj.state.iter().all(|x| x[2] == 0.0 && x[17] == 0.0), "{}", s.name());
    }
    let settings = HinfSettings::default();
    let design = HinfDesignModel::full_vehicle(&p, &settings).unwrap();
    let controller = design.synthesize(&settings).unwrap();
    assert!(design.mirror.is_some());
    let traj = run(&p, &Strategy::Hinf { controller, design, eps_v: settings.eps_v }, &roads, &cfg).unwrap();
    assert!(traj.state.iter().all(|x| x[2] == 0.0 && x[17] == 0.0));
    assert!(traj.state.iter().any(|x| x[0] != 0.0));
}

#[test]
fn corner_commands_use_only_their_own_signals() {
    let c = CornerParams { m_u: 200.0, k_s: 180_000.0, k_t: 500_000.0, c_min: 2000.0, c_max: 40_000.0, c_passive: 5000.0 };
    let mut signals: Vec<CornerSignals> = (0..12)
        .map(|i| CornerSignals { accel: (i as f64 - 5.5) * 0.3, x_def: 0.01 * (i as f64).sin(), v_def: 0.2 * (i as f64).cos() })
        .collect();
    for s in local_strategies() {
        let before: Vec<f64> = signals.iter().map(|g| corner_command(&s, &c, g).unwrap().c_in()).collect();
        for j in 0..12 {
            let saved = signals[j];
            signals[j] = CornerSignals { accel: -saved.accel * 3.0, x_def: -saved.x_def, v_def: saved.v_def * 0.5 };
            for i in (0..12).filter(|&i| i != j) {
                assert_eq!(corner_command(&s, &c, &signals[i]).unwrap().c_in(), before[i]);
            }
            signals[j] = saved;
        }
    }
}

#[test]
fn step_refinement_of_the_integrator() {
    let p = QuarterCarParams::paper_quarter();
    let coarse = SimConfig::default();
    let fine = SimConfig { dt: coarse.dt / 2.0, controller_period: 2, ..coarse };
    for s in local_strategies() {
        let a = run(&p, &s, &[bump()], &coarse).unwrap();
        let b = run(&p, &s, &[bump()], &fine).unwrap();
        let common: Vec<f64> = b.accel.iter().step_by(2).copied().collect();
        let (ra, rb) = (rms(&a.accel).unwrap(), rms(&common).unwrap());
        assert!((rb / ra - 1.0).abs() < 1e-3, "{}: {ra} vs {rb}", s.name());
    }
}
