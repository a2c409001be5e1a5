//! Damper strategies: passive, ADD, PDD and the saturation-aware
//! H-infinity scheme.
//!
//! ADD and PDD act on one corner at a time. The H-infinity strategy runs an
//! unconstrained copy of the linear vehicle model in closed loop with the
//! synthesized controller; the force that copy asks for is what the real
//! damper is commanded to realize, clipped to what a semi-active device can
//! do at its current deflection rate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::lti::{linalg, synthesize_hinf_with, GeneralizedPlant, HinfController, SynthesisOptions};
use crate::vehicle::{self, CornerParams, FullVehicleParams, HinfWeights, QuarterCarParams};
use crate::{Error, Result};

/// Damping coefficient applied at one corner (N s/m), always inside the
/// corner's `[c_min, c_max]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DamperCommand(f64);

impl DamperCommand {
    pub fn new(c_in: f64, corner: &CornerParams) -> Result<Self> {
        if !(corner.c_min..=corner.c_max).contains(&c_in) {
            return Err(Error::arg(format!(
                "damping {c_in} outside [{}, {}]",
                corner.c_min, corner.c_max
            )));
        }
        Ok(Self(c_in))
    }

    fn clamped(c_in: f64, corner: &CornerParams) -> Self {
        Self(corner.clamp(c_in))
    }

    pub fn c_in(self) -> f64 {
        self.0
    }
}

pub fn passive_law(corner: &CornerParams) -> DamperCommand {
    DamperCommand(corner.c_passive)
}

/// Acceleration driven damper: maximum damping while the sprung
/// acceleration and the deflection rate share a sign.
pub fn add_law(a_s: f64, v_def: f64, corner: &CornerParams) -> DamperCommand {
    if a_s * v_def <= 0.0 {
        DamperCommand(corner.c_min)
    } else {
        DamperCommand(corner.c_max)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PddVariant {
    /// `c_min` test, then `c_max` test on the dissipated-power expression.
    #[default]
    DissipativityConsistent,
    /// Branch conditions evaluated exactly as originally typeset (both
    /// tests use `c_min` and a linear rate term), which leaves the
    /// force-cancelling branch unreachable.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PddBranch {
    Min,
    Max,
    /// `x_def != 0`, `v_def = 0`: midpoint damping.
    Stalled,
    /// Damper force cancels the spring force.
    Cancel,
}

pub fn pdd_branch(x_def: f64, v_def: f64, corner: &CornerParams, variant: PddVariant) -> PddBranch {
    let k = corner.k_s;
    // A stalled, deflected damper matches both power tests with equality;
    // the dedicated branch takes precedence there.
    if x_def != 0.0 && v_def == 0.0 {
        return PddBranch::Stalled;
    }
    match variant {
        PddVariant::DissipativityConsistent => {
            let spring_power = k * x_def * v_def;
            if spring_power + corner.c_min * v_def * v_def >= 0.0 {
                PddBranch::Min
            } else if spring_power + corner.c_max * v_def * v_def <= 0.0 {
                PddBranch::Max
            } else {
                PddBranch::Cancel
            }
        }
        PddVariant::AsPrinted => {
            let test = k * x_def * v_def + corner.c_min * v_def;
            if test >= 0.0 {
                PddBranch::Min
            } else if test < 0.0 {
                PddBranch::Max
            } else {
                // only reachable through NaN
                PddBranch::Cancel
            }
        }
    }
}

/// Power driven damper.
pub fn pdd_law(x_def: f64, v_def: f64, corner: &CornerParams, variant: PddVariant) -> DamperCommand {
    match pdd_branch(x_def, v_def, corner, variant) {
        PddBranch::Min => DamperCommand(corner.c_min),
        PddBranch::Max => DamperCommand(corner.c_max),
        PddBranch::Stalled => DamperCommand(0.5 * (corner.c_min + corner.c_max)),
        // strictly inside (c_min, c_max) whenever this branch is selected;
        // the clamp only guards rounding at the boundaries
        PddBranch::Cancel => DamperCommand::clamped(-corner.k_s * x_def / v_def, corner),
    }
}

pub fn damper_force(cmd: DamperCommand, v_def: f64) -> f64 {
    cmd.0 * v_def
}

/// Below this deflection rate (m/s) a requested force is not realizable and
/// the damper falls back to `c_min`.
pub const DEFAULT_EPS_V: f64 = 1e-4;

/// Damping that best realizes `f_req` at deflection rate `v_def`.
pub fn clip_damping(f_req: f64, v_def: f64, corner: &CornerParams, eps_v: f64) -> DamperCommand {
    if v_def.abs() >= eps_v && f_req.is_finite() {
        DamperCommand::clamped(f_req / v_def, corner)
    } else {
        DamperCommand(corner.c_min)
    }
}

/// Settings of the H-infinity strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HinfSettings {
    /// Damping the design model is linearized at; defaults to each corner's
    /// passive value.
    pub c_nominal: Option<f64>,
    pub weights: HinfWeights,
    pub gamma_tol: f64,
    pub gamma_max: f64,
    pub backoff: f64,
    pub eps_v: f64,
}

impl Default for HinfSettings {
    fn default() -> Self {
        Self {
            c_nominal: None,
            weights: HinfWeights::default(),
            gamma_tol: 1e-3,
            gamma_max: 1e6,
            backoff: 1.0,
            eps_v: DEFAULT_EPS_V,
        }
    }
}

impl HinfSettings {
    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions { gamma_tol: self.gamma_tol, gamma_max: self.gamma_max, backoff: self.backoff }
    }

    fn nominal(&self, corner: &CornerParams) -> f64 {
        self.c_nominal.unwrap_or(corner.c_passive)
    }
}

/// Design model of the H-infinity strategy: the generalized plant plus what
/// the runtime needs to turn its control channel into damper forces.
#[derive(Debug, Clone)]
pub struct HinfDesignModel {
    pub plant: GeneralizedPlant,
    /// Number of leading disturbance inputs that are road elevations.
    pub road_inputs: usize,
    /// Rows map the model state to each corner's deflection rate.
    pub v_def_map: DMatrix<f64>,
    pub c_nominal: Vec<f64>,
    /// Left/right corner swap when the vehicle is mirror-symmetric. The
    /// runtime then applies the mirror average of the controller, which is
    /// exactly equivariant under the swap.
    pub mirror: Option<Vec<usize>>,
}

impl HinfDesignModel {
    pub fn quarter_car(p: &QuarterCarParams, settings: &HinfSettings) -> Result<Self> {
        let c_nom = settings.nominal(&p.corner);
        let plant = vehicle::quarter_car_generalized_plant(p, c_nom, &settings.weights)?;
        Ok(Self {
            plant,
            road_inputs: 1,
            v_def_map: DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.0, -1.0]),
            c_nominal: vec![c_nom],
            mirror: None,
        })
    }

    pub fn full_vehicle(p: &FullVehicleParams, settings: &HinfSettings) -> Result<Self> {
        let c_nom: Vec<f64> = p.corners.iter().map(|c| settings.nominal(c)).collect();
        let plant = vehicle::full_vehicle_generalized_plant(p, &c_nom, &settings.weights)?;
        let n = p.corner_count();
        let h = 3 + n;
        let mut v_def_map = DMatrix::zeros(n, 2 * h);
        for i in 0..n {
            v_def_map[(i, h)] = 1.0;
            v_def_map[(i, h + 1)] = -p.long_arm(i);
            v_def_map[(i, h + 2)] = p.lat_arm(i);
            v_def_map[(i, h + 3 + i)] = -1.0;
        }
        let symmetric = (0..p.axle_count()).all(|a| p.corners[2 * a] == p.corners[2 * a + 1]);
        let mirror = symmetric.then(|| (0..n).map(|i| i ^ 1).collect());
        Ok(Self { plant, road_inputs: n, v_def_map, c_nominal: c_nom, mirror })
    }

    pub fn synthesize(&self, settings: &HinfSettings) -> Result<HinfController> {
        synthesize_hinf_with(&self.plant, &settings.synthesis_options())
    }
}

/// Discretization of the internal loop for one step size.
#[derive(Debug, Clone)]
struct Discrete {
    dt: f64,
    phi: DMatrix<f64>,
    /// Weights of the road at the start and the end of the step.
    gamma0: DMatrix<f64>,
    gamma1: DMatrix<f64>,
}

/// Runtime of the saturation-aware H-infinity strategy: the unconstrained
/// internal model in closed loop with the controller, driven by the road.
///
/// The joint state `s = [model; controller]` obeys `s' = M s + N r`. The
/// estimator part of the controller is typically far too fast for an
/// explicit integrator at the simulation step, so each step uses the exact
/// transition of this linear system with the road interpolated linearly
/// across the step.
#[derive(Debug, Clone)]
pub struct HinfRuntimeState {
    m: DMatrix<f64>,
    n: DMatrix<f64>,
    /// Force request `F_s s + F_r r`.
    f_s: DMatrix<f64>,
    f_r: DMatrix<f64>,
    /// Measurements `Y_s s + Y_r r`.
    y_s: DMatrix<f64>,
    y_r: DMatrix<f64>,
    model_order: usize,
    state: DVector<f64>,
    mirror: Option<Mirror>,
    discrete: Option<Discrete>,
}

/// Second copy of the loop driven by the antisymmetric part of the road;
/// the first copy then only sees the symmetric part.
#[derive(Debug, Clone)]
struct Mirror {
    perm: Vec<usize>,
    anti: DVector<f64>,
}

impl Mirror {
    fn swap(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), self.perm.iter().map(|&j| v[j]))
    }

    /// `(v + P v) / 2` and `(v - P v) / 2`.
    fn split(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let p = self.swap(v);
        ((v + &p) * 0.5, (v - &p) * 0.5)
    }
}

impl HinfRuntimeState {
    pub fn new(controller: &HinfController, design: &HinfDesignModel) -> Result<Self> {
        let plant = &design.plant;
        let k = &controller.k;
        let (_, nu, _, ny) = plant.dims();
        let r = design.road_inputs;
        if k.inputs() != ny || k.outputs() != nu || design.c_nominal.len() != nu || r > plant.b1.ncols() {
            return Err(Error::arg("controller does not match the design model"));
        }
        let (nm, nk) = (plant.order(), k.order());
        let loop_inv = (DMatrix::identity(nu, nu) - &k.d * &plant.d22)
            .try_inverse()
            .ok_or(Error::IllPosedInterconnection)?;
        let c_y = &plant.c2;
        let d_yr = plant.d21.columns(0, r).into_owned();

        let u_s = linalg::blocks(&[&[&(&loop_inv * &k.d * c_y), &(&loop_inv * &k.c)]]);
        let u_r = &loop_inv * &k.d * &d_yr;
        let y_s = linalg::blocks(&[&[c_y, &DMatrix::zeros(ny, nk)]]) + &plant.d22 * &u_s;
        let y_r = &d_yr + &plant.d22 * &u_r;
        let open = linalg::blocks(&[
            &[&plant.a, &DMatrix::zeros(nm, nk)],
            &[&DMatrix::zeros(nk, nm), &k.a],
        ]);
        let m = open + linalg::blocks(&[&[&(&plant.b2 * &u_s)], &[&(&k.b * &y_s)]]);
        let n = linalg::blocks(&[&[&(plant.b1.columns(0, r) + &plant.b2 * &u_r)], &[&(&k.b * &y_r)]]);
        let nominal = DMatrix::from_diagonal(&DVector::from_column_slice(&design.c_nominal)) * &design.v_def_map;
        let f_s = linalg::blocks(&[&[&nominal, &DMatrix::zeros(nu, nk)]]) + &u_s;
        let mirror = match &design.mirror {
            Some(perm) => {
                let valid = perm.len() == r && r == nu && (0..r).all(|i| perm[i] < r && perm[perm[i]] == i);
                if !valid {
                    return Err(Error::arg("mirror must be an involution on the corners"));
                }
                Some(Mirror { perm: perm.clone(), anti: DVector::zeros(nm + nk) })
            }
            None => None,
        };
        Ok(Self {
            m,
            n,
            f_s,
            f_r: u_r,
            y_s,
            y_r,
            model_order: nm,
            state: DVector::zeros(nm + nk),
            mirror,
            discrete: None,
        })
    }

    fn joint_state(&self) -> DVector<f64> {
        match &self.mirror {
            Some(m) => &self.state + &m.anti,
            None => self.state.clone(),
        }
    }

    pub fn model_state(&self) -> DVector<f64> {
        self.joint_state().rows(0, self.model_order).into_owned()
    }

    pub fn controller_state(&self) -> DVector<f64> {
        let s = self.joint_state();
        s.rows(self.model_order, s.len() - self.model_order).into_owned()
    }

    /// Measurements of the internal model at the current state.
    pub fn measurements(&self, road: &DVector<f64>) -> DVector<f64> {
        &self.y_s * self.joint_state() + &self.y_r * road
    }

    /// Total damper force per corner requested by the controller at the
    /// current state: nominal damping force of the internal model plus the
    /// controller's correction.
    pub fn requested_forces(&self, road: &DVector<f64>) -> DVector<f64> {
        match &self.mirror {
            Some(m) => {
                let (sym, anti) = m.split(road);
                let f_sym = &self.f_s * &self.state + &self.f_r * sym;
                let f_anti = &self.f_s * &m.anti + &self.f_r * anti;
                m.split(&f_sym).0 + m.split(&f_anti).1
            }
            None => &self.f_s * &self.state + &self.f_r * road,
        }
    }

    fn discretize(&mut self, dt: f64) {
        if self.discrete.as_ref().is_none_or(|d| d.dt != dt) {
            let (ns, nr) = (self.m.nrows(), self.n.ncols());
            let mut aug = DMatrix::zeros(ns + 2 * nr, ns + 2 * nr);
            aug.view_mut((0, 0), (ns, ns)).copy_from(&(&self.m * dt));
            aug.view_mut((0, ns), (ns, nr)).copy_from(&(&self.n * dt));
            aug.view_mut((ns, ns + nr), (nr, nr)).fill_with_identity();
            let e = aug.exp();
            let g_start = e.view((0, ns), (ns, nr)).into_owned();
            let g_slope = e.view((0, ns + nr), (ns, nr)).into_owned();
            self.discrete = Some(Discrete {
                dt,
                phi: e.view((0, 0), (ns, ns)).into_owned(),
                gamma0: &g_start - &g_slope,
                gamma1: g_slope,
            });
        }
    }

    /// Returns the force request at `t` and advances the internal model and
    /// controller to `t + dt`.
    pub fn hinf_step(&mut self, t: f64, dt: f64, road: &dyn Fn(f64) -> DVector<f64>) -> Result<DVector<f64>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::arg("hinf_step: dt must be positive"));
        }
        let (r0, r1) = (road(t), road(t + dt));
        let f_req = self.requested_forces(&r0);
        if !f_req.iter().all(|v| v.is_finite()) {
            return Err(Error::RuntimeDivergence { last_finite_time: t });
        }
        self.discretize(dt);
        let d = self.discrete.as_ref().unwrap();
        let advance = |s: &DVector<f64>, r0: &DVector<f64>, r1: &DVector<f64>| {
            let next = &d.phi * s + &d.gamma0 * r0 + &d.gamma1 * r1;
            match next.iter().all(|v| v.is_finite()) {
                true => Ok(next),
                false => Err(Error::RuntimeDivergence { last_finite_time: t }),
            }
        };
        match &mut self.mirror {
            Some(m) => {
                let ((s0, a0), (s1, a1)) = (m.split(&r0), m.split(&r1));
                self.state = advance(&self.state, &s0, &s1)?;
                m.anti = advance(&m.anti, &a0, &a1)?;
            }
            None => self.state = advance(&self.state, &r0, &r1)?,
        }
        Ok(f_req)
    }
}
