//! Fixed-step RK4 integration of the switched closed loop and trajectory
//! logging.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::controllers::{
    add_law, clip_damping, passive_law, pdd_law, DamperCommand, HinfDesignModel, HinfRuntimeState,
    PddVariant,
};
use crate::lti::HinfController;
use crate::road::RoadProfile;
use crate::vehicle::{
    self, CornerParams, FullVehicleParams, FullVehicleState, QuarterCarParams, QuarterCarState,
};
use crate::{Error, Result};

/// State that can be advanced by [`rk4_step`].
pub trait OdeState: Clone {
    /// `self + k * d`
    fn add_scaled(&self, k: f64, d: &Self) -> Self;
    fn is_finite(&self) -> bool;
}

impl OdeState for f64 {
    fn add_scaled(&self, k: f64, d: &Self) -> Self {
        self + k * d
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl OdeState for DVector<f64> {
    fn add_scaled(&self, k: f64, d: &Self) -> Self {
        self + d * k
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// One classical Runge-Kutta step of `s' = rhs(t, s)`.
pub fn rk4_step<S, F>(rhs: F, s: &S, t: f64, dt: f64) -> Result<S>
where
    S: OdeState,
    F: Fn(f64, &S) -> Result<S>,
{
    let diverged = || Error::IntegrationDivergence { time: t };
    let finite = |x: S| if x.is_finite() { Ok(x) } else { Err(diverged()) };
    let h = 0.5 * dt;
    let k1 = finite(rhs(t, s)?)?;
    let k2 = finite(rhs(t + h, &finite(s.add_scaled(h, &k1))?)?)?;
    let k3 = finite(rhs(t + h, &finite(s.add_scaled(h, &k2))?)?)?;
    let k4 = finite(rhs(t + dt, &finite(s.add_scaled(dt, &k3))?)?)?;
    let sum = k1.add_scaled(2.0, &k2).add_scaled(2.0, &k3).add_scaled(1.0, &k4);
    finite(s.add_scaled(dt / 6.0, &sum))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Commands are recomputed every this many steps and held in between.
    pub controller_period: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-3, duration: 5.0, controller_period: 1 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::arg(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(Error::arg(format!("duration {} is shorter than dt {}", self.duration, self.dt)));
        }
        if self.controller_period == 0 {
            return Err(Error::arg("controller_period must be at least 1"));
        }
        Ok(())
    }

    /// Number of logged samples, including `t = 0`.
    pub fn samples(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }
}

/// Damper strategy of a run.
#[derive(Debug, Clone)]
pub enum Strategy {
    Passive,
    Add,
    Pdd(PddVariant),
    Hinf { controller: HinfController, design: HinfDesignModel, eps_v: f64 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Passive => "passive",
            Strategy::Add => "add",
            Strategy::Pdd(_) => "pdd",
            Strategy::Hinf { .. } => "hinf",
        }
    }
}

/// Uniformly sampled log of a run. Per-corner quantities are indexed
/// `[sample][corner]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub time: Vec<f64>,
    /// Full state in the model's vector ordering.
    pub state: Vec<Vec<f64>>,
    pub c_in: Vec<Vec<f64>>,
    pub force: Vec<Vec<f64>>,
    pub road: Vec<Vec<f64>>,
    pub x_def: Vec<Vec<f64>>,
    pub v_def: Vec<Vec<f64>>,
    /// Sprung-mass (quarter car) or CG heave (full vehicle) acceleration.
    pub accel: Vec<f64>,
    /// Sprung-mass or CG heave displacement.
    pub displacement: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn corners(&self) -> usize {
        self.c_in.first().map_or(0, Vec::len)
    }

    /// Series of one corner quantity, e.g. `traj.corner_series(&traj.c_in, 0)`.
    pub fn corner_series(rows: &[Vec<f64>], corner: usize) -> Vec<f64> {
        rows.iter().map(|r| r[corner]).collect()
    }
}

/// Vehicle model as seen by the simulation loop.
pub trait Vehicle {
    type State: OdeState;

    fn corners(&self) -> &[CornerParams];
    fn initial_state(&self) -> Self::State;
    fn x_def(&self, s: &Self::State, i: usize) -> f64;
    fn v_def(&self, s: &Self::State, i: usize) -> f64;
    fn rhs(&self, s: &Self::State, forces: &[f64], road: &[f64]) -> Self::State;
    /// Body acceleration above corner `i` for a derivative from [`Vehicle::rhs`].
    fn corner_accel(&self, deriv: &Self::State, i: usize) -> f64;
    /// Reported acceleration (sprung mass or CG heave).
    fn accel(&self, deriv: &Self::State) -> f64;
    fn displacement(&self, s: &Self::State) -> f64;
    fn flatten(&self, s: &Self::State) -> Vec<f64>;
}

impl Vehicle for QuarterCarParams {
    type State = QuarterCarState;

    fn corners(&self) -> &[CornerParams] {
        std::slice::from_ref(&self.corner)
    }

    fn initial_state(&self) -> QuarterCarState {
        QuarterCarState::default()
    }

    fn x_def(&self, s: &QuarterCarState, _: usize) -> f64 {
        s.x_def()
    }

    fn v_def(&self, s: &QuarterCarState, _: usize) -> f64 {
        s.v_def()
    }

    fn rhs(&self, s: &QuarterCarState, forces: &[f64], road: &[f64]) -> QuarterCarState {
        vehicle::quarter_car_rhs_force(self, s, forces[0], road[0])
    }

    fn corner_accel(&self, deriv: &QuarterCarState, _: usize) -> f64 {
        deriv.v_s
    }

    fn accel(&self, deriv: &QuarterCarState) -> f64 {
        deriv.v_s
    }

    fn displacement(&self, s: &QuarterCarState) -> f64 {
        s.x_s
    }

    fn flatten(&self, s: &QuarterCarState) -> Vec<f64> {
        s.to_array().to_vec()
    }
}

impl Vehicle for FullVehicleParams {
    type State = FullVehicleState;

    fn corners(&self) -> &[CornerParams] {
        &self.corners
    }

    fn initial_state(&self) -> FullVehicleState {
        FullVehicleState::zeros(self.corner_count())
    }

    fn x_def(&self, s: &FullVehicleState, i: usize) -> f64 {
        s.x_def(self, i)
    }

    fn v_def(&self, s: &FullVehicleState, i: usize) -> f64 {
        s.v_def(self, i)
    }

    fn rhs(&self, s: &FullVehicleState, forces: &[f64], road: &[f64]) -> FullVehicleState {
        vehicle::full_vehicle_rhs_force(self, s, forces, road)
    }

    fn corner_accel(&self, deriv: &FullVehicleState, i: usize) -> f64 {
        deriv.heave_rate - self.long_arm(i) * deriv.pitch_rate + self.lat_arm(i) * deriv.roll_rate
    }

    fn accel(&self, deriv: &FullVehicleState) -> f64 {
        deriv.heave_rate
    }

    fn displacement(&self, s: &FullVehicleState) -> f64 {
        s.heave
    }

    fn flatten(&self, s: &FullVehicleState) -> Vec<f64> {
        s.to_vector().iter().copied().collect()
    }
}

/// What a corner-local strategy measures at its own corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSignals {
    /// Body acceleration above the corner.
    pub accel: f64,
    pub x_def: f64,
    pub v_def: f64,
}

/// Command of a corner-local strategy; `None` for the centralized
/// H-infinity strategy.
pub fn corner_command(strategy: &Strategy, corner: &CornerParams, signals: &CornerSignals) -> Option<DamperCommand> {
    match strategy {
        Strategy::Passive => Some(passive_law(corner)),
        Strategy::Add => Some(add_law(signals.accel, signals.v_def, corner)),
        Strategy::Pdd(variant) => Some(pdd_law(signals.x_def, signals.v_def, corner, *variant)),
        Strategy::Hinf { .. } => None,
    }
}

fn sample_all(roads: &[RoadProfile], t: f64) -> Vec<f64> {
    roads.iter().map(|r| r.sample(t)).collect()
}

/// Simulates `model` from rest under `strategy` with one road profile per
/// corner.
pub fn run<V: Vehicle>(model: &V, strategy: &Strategy, roads: &[RoadProfile], cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let corners = model.corners();
    let n = corners.len();
    if roads.len() != n {
        return Err(Error::arg(format!("{} road profiles given for {n} corners", roads.len())));
    }
    let mut hinf = match strategy {
        Strategy::Hinf { controller, design, eps_v } => {
            if !(*eps_v > 0.0) {
                return Err(Error::arg("eps_v must be positive"));
            }
            if design.road_inputs != n {
                return Err(Error::arg("H-infinity design model does not match the vehicle"));
            }
            Some((HinfRuntimeState::new(controller, design)?, *eps_v))
        }
        _ => None,
    };
    let road_vec = |t: f64| DVector::from_vec(sample_all(roads, t));

    let samples = cfg.samples();
    let dt = cfg.dt;
    let mut traj = Trajectory { dt, ..Default::default() };
    let mut state = model.initial_state();
    let mut cmd: Vec<f64> = corners.iter().map(|c| passive_law(c).c_in()).collect();
    if !matches!(strategy, Strategy::Passive) {
        cmd = corners.iter().map(|c| c.c_min).collect();
    }
    let forces_of = |s: &V::State, cmd: &[f64]| -> Vec<f64> {
        (0..n).map(|i| cmd[i] * model.v_def(s, i)).collect()
    };

    for k in 0..samples {
        let t = k as f64 * dt;
        let road = sample_all(roads, t);
        let f_req = match hinf.as_mut() {
            Some((rt, _)) => Some(rt.hinf_step(t, dt, &road_vec)?),
            None => None,
        };

        if k % cfg.controller_period == 0 {
            // acceleration at the end of the previous step, under the held command
            let prev = model.rhs(&state, &forces_of(&state, &cmd), &road);
            for (i, corner) in corners.iter().enumerate() {
                let signals = CornerSignals {
                    accel: model.corner_accel(&prev, i),
                    x_def: model.x_def(&state, i),
                    v_def: model.v_def(&state, i),
                };
                let c = match (&hinf, &f_req) {
                    (Some((_, eps_v)), Some(f)) => clip_damping(f[i], signals.v_def, corner, *eps_v),
                    _ => corner_command(strategy, corner, &signals)
                        .expect("non-H-infinity strategies are corner-local"),
                };
                cmd[i] = c.c_in();
            }
        }

        let forces = forces_of(&state, &cmd);
        let deriv = model.rhs(&state, &forces, &road);
        traj.time.push(t);
        traj.state.push(model.flatten(&state));
        traj.c_in.push(cmd.clone());
        traj.force.push(forces);
        traj.x_def.push((0..n).map(|i| model.x_def(&state, i)).collect());
        traj.v_def.push((0..n).map(|i| model.v_def(&state, i)).collect());
        traj.road.push(road);
        traj.accel.push(model.accel(&deriv));
        traj.displacement.push(model.displacement(&state));

        if k + 1 < samples {
            let held = &cmd;
            state = rk4_step(
                |tau, s: &V::State| Ok(model.rhs(s, &forces_of(s, held), &sample_all(roads, tau))),
                &state,
                t,
                dt,
            )?;
        }
    }
    Ok(traj)
}
