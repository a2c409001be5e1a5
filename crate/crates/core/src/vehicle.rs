//! Quarter-car and multi-axle rigid-body suspension models.
//!
//! Coordinates are deviations from static equilibrium, so gravity never
//! appears. A positive deflection rate `v_def = v_s - v_u` extends the
//! suspension; the damper force `c * v_def` pulls the body down and the
//! wheel up.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::lti::GeneralizedPlant;
use crate::sim::OdeState;
use crate::{Error, Result};

/// Suspension and wheel parameters of one corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerParams {
    /// Unsprung mass (kg).
    pub m_u: f64,
    /// Suspension stiffness (N/m).
    pub k_s: f64,
    /// Tire stiffness (N/m).
    pub k_t: f64,
    /// Damping bounds (N s/m).
    pub c_min: f64,
    pub c_max: f64,
    /// Damping of the passive reference suspension (N s/m).
    pub c_passive: f64,
}

impl CornerParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m_u", self.m_u),
            ("k_s", self.k_s),
            ("k_t", self.k_t),
            ("c_min", self.c_min),
            ("c_max", self.c_max),
            ("c_passive", self.c_passive),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::arg(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if self.c_min > self.c_max {
            return Err(Error::arg(format!(
                "c_min ({}) must not exceed c_max ({})",
                self.c_min, self.c_max
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, c: f64) -> f64 {
        c.clamp(self.c_min, self.c_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarterCarParams {
    /// Sprung mass (kg).
    pub m_s: f64,
    #[serde(flatten)]
    pub corner: CornerParams,
}

impl QuarterCarParams {
    /// Heavy-truck corner used for the quarter-car comparison.
    pub fn paper_quarter() -> Self {
        Self {
            m_s: 2250.0,
            corner: CornerParams {
                m_u: 200.0,
                k_s: 180_000.0,
                k_t: 500_000.0,
                c_min: 2000.0,
                c_max: 40_000.0,
                c_passive: 5000.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_s.is_finite() && self.m_s > 0.0) {
            return Err(Error::arg(format!("m_s must be finite and positive, got {}", self.m_s)));
        }
        self.corner.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuarterCarState {
    pub x_s: f64,
    pub v_s: f64,
    pub x_u: f64,
    pub v_u: f64,
}

impl QuarterCarState {
    pub fn x_def(&self) -> f64 {
        self.x_s - self.x_u
    }

    pub fn v_def(&self) -> f64 {
        self.v_s - self.v_u
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_s, self.v_s, self.x_u, self.v_u]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { x_s: v[0], v_s: v[1], x_u: v[2], v_u: v[3] }
    }

    /// Kinetic plus elastic energy (J).
    pub fn energy(&self, p: &QuarterCarParams, x_r: f64) -> f64 {
        let c = &p.corner;
        0.5 * p.m_s * self.v_s.powi(2)
            + 0.5 * c.m_u * self.v_u.powi(2)
            + 0.5 * c.k_s * self.x_def().powi(2)
            + 0.5 * c.k_t * (self.x_u - x_r).powi(2)
    }
}

impl OdeState for QuarterCarState {
    fn add_scaled(&self, k: f64, d: &Self) -> Self {
        Self {
            x_s: self.x_s + k * d.x_s,
            v_s: self.v_s + k * d.v_s,
            x_u: self.x_u + k * d.x_u,
            v_u: self.v_u + k * d.v_u,
        }
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Time derivative of the quarter car for damping `c_in` and road `x_r`.
pub fn quarter_car_rhs(p: &QuarterCarParams, s: &QuarterCarState, c_in: f64, x_r: f64) -> Result<QuarterCarState> {
    if !(c_in.is_finite() && x_r.is_finite() && s.is_finite()) {
        return Err(Error::arg("quarter_car_rhs: non-finite input"));
    }
    Ok(quarter_car_rhs_force(p, s, c_in * s.v_def(), x_r))
}

/// Same dynamics with the damper force given directly (N).
pub fn quarter_car_rhs_force(p: &QuarterCarParams, s: &QuarterCarState, damper_force: f64, x_r: f64) -> QuarterCarState {
    let c = &p.corner;
    let suspension = damper_force + c.k_s * s.x_def();
    QuarterCarState {
        x_s: s.v_s,
        v_s: -suspension / p.m_s,
        x_u: s.v_u,
        v_u: (suspension - c.k_t * (s.x_u - x_r)) / c.m_u,
    }
}

/// Tunable weights of the H-infinity generalized plants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HinfWeights {
    /// Weight on sprung (heave) acceleration.
    pub accel: f64,
    /// Weight on pitch acceleration (multi-axle only).
    pub pitch: f64,
    /// Weight on roll acceleration (multi-axle only).
    pub roll: f64,
    /// Weight on each damper force deviation.
    pub control: f64,
    /// Scale of the measurement-noise channels.
    pub noise: f64,
}

impl Default for HinfWeights {
    fn default() -> Self {
        Self { accel: 1.0, pitch: 1.0, roll: 1.0, control: 1e-4, noise: 1e-3 }
    }
}

impl HinfWeights {
    fn check(&self) -> Result<()> {
        let named = [
            ("accel", self.accel),
            ("pitch", self.pitch),
            ("roll", self.roll),
            ("control", self.control),
            ("noise", self.noise),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::arg(format!("weight `{name}` must be finite and non-negative")));
            }
        }
        if self.control == 0.0 {
            return Err(Error::PlantIrregular(
                "control weight is zero: D12 loses the direct control penalty".into(),
            ));
        }
        if self.noise == 0.0 {
            return Err(Error::PlantIrregular("noise weight is zero: D21 loses full row rank".into()));
        }
        Ok(())
    }
}

/// Quarter car linearized at damping `c_nominal` for H-infinity synthesis.
///
/// * state `[x_s, v_s, x_u, v_u]`
/// * `w = [x_r, n_1, n_2]` (road, two sensor noises)
/// * `u` = damper force on top of `c_nominal * v_def` (N)
/// * `z = [accel * a_s, control * u]`
/// * `y = [x_def + noise * n_1, a_s + noise * n_2]`
pub fn quarter_car_generalized_plant(
    p: &QuarterCarParams,
    c_nominal: f64,
    weights: &HinfWeights,
) -> Result<GeneralizedPlant> {
    p.validate()?;
    weights.check()?;
    let c = &p.corner;
    if !(c.c_min..=c.c_max).contains(&c_nominal) {
        return Err(Error::arg(format!(
            "nominal damping {c_nominal} outside [{}, {}]",
            c.c_min, c.c_max
        )));
    }
    let (ms, mu) = (p.m_s, c.m_u);
    let accel_row = [-c.k_s / ms, -c_nominal / ms, c.k_s / ms, c_nominal / ms];
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        accel_row[0], accel_row[1], accel_row[2], accel_row[3],
        0.0, 0.0, 0.0, 1.0,
        c.k_s / mu, c_nominal / mu, -(c.k_s + c.k_t) / mu, -c_nominal / mu,
    ]);
    let mut b1 = DMatrix::zeros(4, 3);
    b1[(3, 0)] = c.k_t / mu;
    let b2 = DMatrix::from_column_slice(4, 1, &[0.0, -1.0 / ms, 0.0, 1.0 / mu]);
    let mut c1 = DMatrix::zeros(2, 4);
    for (j, v) in accel_row.iter().enumerate() {
        c1[(0, j)] = weights.accel * v;
    }
    let mut c2 = DMatrix::zeros(2, 4);
    c2[(0, 0)] = 1.0;
    c2[(0, 2)] = -1.0;
    for (j, v) in accel_row.iter().enumerate() {
        c2[(1, j)] = *v;
    }
    let d11 = DMatrix::zeros(2, 3);
    let d12 = DMatrix::from_column_slice(2, 1, &[-weights.accel / ms, weights.control]);
    let d21 = DMatrix::from_row_slice(2, 3, &[0.0, weights.noise, 0.0, 0.0, 0.0, weights.noise]);
    let d22 = DMatrix::from_column_slice(2, 1, &[0.0, -1.0 / ms]);
    GeneralizedPlant::new(a, b1, b2, c1, c2, d11, d12, d21, d22)
}

/// Multi-axle vehicle: rigid sprung body (heave, pitch, roll) on two
/// corners per axle. Corner `2i` is the left wheel of axle `i`, `2i + 1`
/// the right one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullVehicleParams {
    /// Sprung mass (kg).
    pub m_s: f64,
    /// Pitch inertia about the CG (kg m^2).
    pub i_pitch: f64,
    /// Roll inertia about the CG (kg m^2).
    pub i_roll: f64,
    /// Axle positions measured rearward from the front axle (m); first is 0.
    pub axle_positions: Vec<f64>,
    /// CG position measured rearward from the front axle (m).
    pub cg_position: f64,
    /// Lateral distance from centerline to each wheel (m).
    pub half_track: f64,
    /// Per-corner parameters, `2 * axle count` entries.
    pub corners: Vec<CornerParams>,
}

impl FullVehicleParams {
    /// Six-axle, twelve-corner truck. The pitch and roll inertias (13000
    /// and 4500 kg m^2) are assumed values for a 9 t body on a 3.6 m
    /// wheelbase.
    pub fn paper_6axle() -> Self {
        let corner = |k_s| CornerParams {
            m_u: 200.0,
            k_s,
            k_t: 500_000.0,
            c_min: 2000.0,
            c_max: 40_000.0,
            c_passive: 5000.0,
        };
        let mut corners = vec![corner(130_000.0); 2];
        corners.extend(std::iter::repeat_n(corner(180_000.0), 10));
        Self {
            m_s: 9000.0,
            i_pitch: 13_000.0,
            i_roll: 4500.0,
            axle_positions: vec![0.0, 1.0, 1.9, 2.4, 3.0, 3.6],
            cg_position: 1.7,
            half_track: 1.0,
            corners,
        }
    }

    pub fn axle_count(&self) -> usize {
        self.axle_positions.len()
    }

    pub fn corner_count(&self) -> usize {
        self.corners.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m_s", self.m_s), ("i_pitch", self.i_pitch), ("i_roll", self.i_roll)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::arg(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !(self.half_track.is_finite() && self.half_track > 0.0) {
            return Err(Error::arg("half_track must be finite and positive"));
        }
        if self.axle_positions.is_empty() {
            return Err(Error::arg("vehicle needs at least one axle"));
        }
        if self.corners.len() != 2 * self.axle_count() {
            return Err(Error::arg(format!(
                "{} corners given for {} axles (expected {})",
                self.corners.len(),
                self.axle_count(),
                2 * self.axle_count()
            )));
        }
        if self.axle_positions.iter().any(|x| !x.is_finite())
            || self.axle_positions.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::arg("axle positions must be finite and non-decreasing"));
        }
        let (front, rear) = (self.axle_positions[0], *self.axle_positions.last().unwrap());
        if !(front..=rear).contains(&self.cg_position) {
            return Err(Error::arg(format!(
                "CG position {} lies outside the wheelbase [{front}, {rear}]",
                self.cg_position
            )));
        }
        self.corners.iter().try_for_each(CornerParams::validate)
    }

    /// Signed longitudinal arm of corner `i` from the CG (positive rearward).
    pub fn long_arm(&self, i: usize) -> f64 {
        self.axle_positions[i / 2] - self.cg_position
    }

    /// Signed lateral arm of corner `i` (left positive).
    pub fn lat_arm(&self, i: usize) -> f64 {
        if i % 2 == 0 {
            self.half_track
        } else {
            -self.half_track
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullVehicleState {
    pub heave: f64,
    pub pitch: f64,
    pub roll: f64,
    pub heave_rate: f64,
    pub pitch_rate: f64,
    pub roll_rate: f64,
    pub x_u: Vec<f64>,
    pub v_u: Vec<f64>,
}

/// Beyond this pitch or roll (rad) the small-angle kinematics are suspect.
pub const SMALL_ANGLE_LIMIT: f64 = 0.3;

impl FullVehicleState {
    pub fn zeros(corners: usize) -> Self {
        Self {
            heave: 0.0,
            pitch: 0.0,
            roll: 0.0,
            heave_rate: 0.0,
            pitch_rate: 0.0,
            roll_rate: 0.0,
            x_u: vec![0.0; corners],
            v_u: vec![0.0; corners],
        }
    }

    pub fn corners(&self) -> usize {
        self.x_u.len()
    }

    pub fn small_angle_ok(&self) -> bool {
        self.pitch.abs() < SMALL_ANGLE_LIMIT && self.roll.abs() < SMALL_ANGLE_LIMIT
    }

    /// Body displacement at the attachment point of corner `i`.
    pub fn attachment(&self, p: &FullVehicleParams, i: usize) -> f64 {
        self.heave - p.long_arm(i) * self.pitch + p.lat_arm(i) * self.roll
    }

    pub fn attachment_rate(&self, p: &FullVehicleParams, i: usize) -> f64 {
        self.heave_rate - p.long_arm(i) * self.pitch_rate + p.lat_arm(i) * self.roll_rate
    }

    pub fn x_def(&self, p: &FullVehicleParams, i: usize) -> f64 {
        self.attachment(p, i) - self.x_u[i]
    }

    pub fn v_def(&self, p: &FullVehicleParams, i: usize) -> f64 {
        self.attachment_rate(p, i) - self.v_u[i]
    }

    /// Flattened as `[heave, pitch, roll, x_u.., heave', pitch', roll', v_u..]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(6 + 2 * self.corners());
        v.extend([self.heave, self.pitch, self.roll]);
        v.extend(&self.x_u);
        v.extend([self.heave_rate, self.pitch_rate, self.roll_rate]);
        v.extend(&self.v_u);
        DVector::from_vec(v)
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let n = (v.len() - 6) / 2;
        let h = 3 + n;
        Self {
            heave: v[0],
            pitch: v[1],
            roll: v[2],
            x_u: v.rows(3, n).iter().copied().collect(),
            heave_rate: v[h],
            pitch_rate: v[h + 1],
            roll_rate: v[h + 2],
            v_u: v.rows(h + 3, n).iter().copied().collect(),
        }
    }
}

impl OdeState for FullVehicleState {
    fn add_scaled(&self, k: f64, d: &Self) -> Self {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + k * y).collect();
        Self {
            heave: self.heave + k * d.heave,
            pitch: self.pitch + k * d.pitch,
            roll: self.roll + k * d.roll,
            heave_rate: self.heave_rate + k * d.heave_rate,
            pitch_rate: self.pitch_rate + k * d.pitch_rate,
            roll_rate: self.roll_rate + k * d.roll_rate,
            x_u: zip(&self.x_u, &d.x_u),
            v_u: zip(&self.v_u, &d.v_u),
        }
    }

    fn is_finite(&self) -> bool {
        [self.heave, self.pitch, self.roll, self.heave_rate, self.pitch_rate, self.roll_rate]
            .iter()
            .chain(&self.x_u)
            .chain(&self.v_u)
            .all(|v| v.is_finite())
    }
}

/// Time derivative of the multi-axle model for per-corner damping and road.
pub fn full_vehicle_rhs(
    p: &FullVehicleParams,
    s: &FullVehicleState,
    c_in: &[f64],
    x_r: &[f64],
) -> Result<FullVehicleState> {
    let n = p.corner_count();
    if c_in.len() != n || x_r.len() != n || s.corners() != n || s.v_u.len() != n {
        return Err(Error::arg(format!("full_vehicle_rhs: expected {n} corners")));
    }
    if !(s.is_finite() && c_in.iter().chain(x_r).all(|v| v.is_finite())) {
        return Err(Error::arg("full_vehicle_rhs: non-finite input"));
    }
    let forces: Vec<f64> = (0..n).map(|i| c_in[i] * s.v_def(p, i)).collect();
    Ok(full_vehicle_rhs_force(p, s, &forces, x_r))
}

/// Same dynamics with per-corner damper forces given directly (N).
pub fn full_vehicle_rhs_force(
    p: &FullVehicleParams,
    s: &FullVehicleState,
    damper_force: &[f64],
    x_r: &[f64],
) -> FullVehicleState {
    let n = p.corner_count();
    let mut heave_acc = 0.0;
    let mut pitch_acc = 0.0;
    let mut roll_acc = 0.0;
    let mut a_u = vec![0.0; n];
    for i in 0..n {
        let c = &p.corners[i];
        let suspension = damper_force[i] + c.k_s * s.x_def(p, i);
        let on_body = -suspension;
        heave_acc += on_body;
        pitch_acc += -p.long_arm(i) * on_body;
        roll_acc += p.lat_arm(i) * on_body;
        a_u[i] = (suspension - c.k_t * (s.x_u[i] - x_r[i])) / c.m_u;
    }
    FullVehicleState {
        heave: s.heave_rate,
        pitch: s.pitch_rate,
        roll: s.roll_rate,
        heave_rate: heave_acc / p.m_s,
        pitch_rate: pitch_acc / p.i_pitch,
        roll_rate: roll_acc / p.i_roll,
        x_u: s.v_u.clone(),
        v_u: a_u,
    }
}

/// Vertical acceleration of each corner's attachment point given a derivative.
pub fn attachment_accelerations(p: &FullVehicleParams, deriv: &FullVehicleState) -> Vec<f64> {
    (0..p.corner_count())
        .map(|i| deriv.heave_rate - p.long_arm(i) * deriv.pitch_rate + p.lat_arm(i) * deriv.roll_rate)
        .collect()
}

/// Linear model `x' = A x + B_road x_r + B_force u`, where `u` is damper
/// force on top of `c_nominal * v_def` at every corner, in the
/// [`FullVehicleState::to_vector`] ordering.
pub struct FullVehicleLinear {
    pub a: DMatrix<f64>,
    pub b_road: DMatrix<f64>,
    pub b_force: DMatrix<f64>,
}

pub fn full_vehicle_linear(p: &FullVehicleParams, c_nominal: &[f64]) -> Result<FullVehicleLinear> {
    p.validate()?;
    let n = p.corner_count();
    if c_nominal.len() != n {
        return Err(Error::arg(format!("expected {n} nominal damping values")));
    }
    let dim = 6 + 2 * n;
    let zero_road = vec![0.0; n];
    let zero_force = vec![0.0; n];
    let column = |s: &FullVehicleState, force: &[f64], road: &[f64]| {
        let f: Vec<f64> = (0..n).map(|i| force[i] + c_nominal[i] * s.v_def(p, i)).collect();
        full_vehicle_rhs_force(p, s, &f, road).to_vector()
    };
    let zero_state = FullVehicleState::zeros(n);
    let mut a = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut e = DVector::zeros(dim);
        e[j] = 1.0;
        a.set_column(j, &column(&FullVehicleState::from_vector(&e), &zero_force, &zero_road));
    }
    let mut b_road = DMatrix::zeros(dim, n);
    let mut b_force = DMatrix::zeros(dim, n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        b_road.set_column(i, &column(&zero_state, &zero_force, &e));
        b_force.set_column(i, &column(&zero_state, &e, &zero_road));
    }
    Ok(FullVehicleLinear { a, b_road, b_force })
}

/// Row indices of heave, pitch and roll accelerations in the state derivative.
fn body_accel_rows(n: usize) -> [usize; 3] {
    let h = 3 + n;
    [h, h + 1, h + 2]
}

/// Multi-axle vehicle linearized at per-corner `c_nominal`, one centralized
/// H-infinity design problem.
///
/// * `w = [x_r (N corners), noise (N + 3)]`
/// * `u` = per-corner damper force on top of the nominal damping (N)
/// * `z = [accel * heave'', pitch * pitch'', roll * roll'', control * u]`
/// * `y = [x_def (N), heave'', pitch'', roll''] + noise * n`
pub fn full_vehicle_generalized_plant(
    p: &FullVehicleParams,
    c_nominal: &[f64],
    weights: &HinfWeights,
) -> Result<GeneralizedPlant> {
    weights.check()?;
    for (i, (c, corner)) in c_nominal.iter().zip(&p.corners).enumerate() {
        if !(corner.c_min..=corner.c_max).contains(c) {
            return Err(Error::arg(format!("nominal damping {c} at corner {i} outside its bounds")));
        }
    }
    let lin = full_vehicle_linear(p, c_nominal)?;
    let n = p.corner_count();
    let dim = lin.a.nrows();
    let rows = body_accel_rows(n);
    let scale = [weights.accel, weights.pitch, weights.roll];

    let ny = n + 3;
    let nw = n + ny;
    let mut b1 = DMatrix::zeros(dim, nw);
    b1.columns_mut(0, n).copy_from(&lin.b_road);

    let mut c1 = DMatrix::zeros(3 + n, dim);
    let mut d12 = DMatrix::zeros(3 + n, n);
    for (k, (&r, &w)) in rows.iter().zip(&scale).enumerate() {
        c1.row_mut(k).copy_from(&(lin.a.row(r) * w));
        d12.row_mut(k).copy_from(&(lin.b_force.row(r) * w));
    }
    d12.view_mut((3, 0), (n, n)).fill_diagonal(weights.control);

    let mut c2 = DMatrix::zeros(ny, dim);
    let mut d22 = DMatrix::zeros(ny, n);
    for i in 0..n {
        // x_def_i = heave - l_i pitch + s_i roll - x_u_i
        c2[(i, 0)] = 1.0;
        c2[(i, 1)] = -p.long_arm(i);
        c2[(i, 2)] = p.lat_arm(i);
        c2[(i, 3 + i)] = -1.0;
    }
    for (k, &r) in rows.iter().enumerate() {
        c2.row_mut(n + k).copy_from(&lin.a.row(r));
        d22.row_mut(n + k).copy_from(&lin.b_force.row(r));
    }
    let mut d21 = DMatrix::zeros(ny, nw);
    d21.view_mut((0, n), (ny, ny)).fill_diagonal(weights.noise);
    let d11 = DMatrix::zeros(3 + n, nw);
    GeneralizedPlant::new(lin.a, b1, lin.b_force, c1, c2, d11, d12, d21, d22)
}
