//! Ride-comfort metrics computed from a [`Trajectory`].

use serde::{Deserialize, Serialize};

use crate::sim::Trajectory;
use crate::vehicle::CornerParams;
use crate::{Error, Result};

pub fn rms(signal: &[f64]) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::arg("rms of an empty series"));
    }
    Ok((signal.iter().map(|v| v * v).sum::<f64>() / signal.len() as f64).sqrt())
}

/// Instantaneous power definition used by [`absorbed_power_series`].
pub trait PowerMetric {
    fn power(&self, traj: &Trajectory, k: usize) -> f64;
}

/// Total power dissipated in the dampers, `sum c_in v_def^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DamperDissipation;

impl PowerMetric for DamperDissipation {
    fn power(&self, traj: &Trajectory, k: usize) -> f64 {
        traj.c_in[k].iter().zip(&traj.v_def[k]).map(|(c, v)| c * v * v).sum()
    }
}

/// `A(t) = (1/t) int_0^t P`, trapezoidal, with `A(0) = P(0)`.
pub fn running_average(power: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(power.len());
    let mut integral = 0.0;
    for (k, p) in power.iter().enumerate() {
        if k == 0 {
            out.push(*p);
            continue;
        }
        integral += 0.5 * dt * (power[k - 1] + p);
        out.push(integral / (k as f64 * dt));
    }
    out
}

pub fn absorbed_power_series(traj: &Trajectory) -> Vec<f64> {
    absorbed_power_series_with(traj, &DamperDissipation)
}

pub fn absorbed_power_series_with(traj: &Trajectory, metric: &dyn PowerMetric) -> Vec<f64> {
    let power: Vec<f64> = (0..traj.len()).map(|k| metric.power(traj, k)).collect();
    running_average(&power, traj.dt)
}

/// Mean of `series` over its final `window` seconds.
pub fn absorbed_power_final(series: &[f64], dt: f64, window: f64) -> Result<f64> {
    if series.is_empty() || !(dt > 0.0) || !(window > 0.0) {
        return Err(Error::arg("absorbed_power_final needs a non-empty series and positive dt and window"));
    }
    let horizon = (series.len() - 1) as f64 * dt;
    if horizon < window * (1.0 - 1e-9) {
        return Err(Error::arg(format!("horizon {horizon} s is shorter than the {window} s window")));
    }
    let span = (window / dt + 1e-9).floor() as usize;
    let tail = &series[series.len() - 1 - span..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

pub const DEFAULT_SWITCH_THRESHOLD: f64 = 0.5;
pub const DEFAULT_POWER_WINDOW: f64 = 0.5;

/// Jumps between consecutive samples larger than `threshold * (c_max - c_min)`.
pub fn switch_count(c_series: &[f64], corner: &CornerParams, threshold: f64) -> usize {
    let limit = threshold * (corner.c_max - corner.c_min);
    c_series.windows(2).filter(|w| (w[1] - w[0]).abs() > limit).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rms_accel: f64,
    pub absorbed_power_final: f64,
    /// Summed over corners.
    pub switch_count: usize,
    #[serde(skip)]
    pub absorbed_power: Vec<f64>,
}

impl MetricReport {
    pub fn compute(traj: &Trajectory, corners: &[CornerParams]) -> Result<Self> {
        if traj.corners() != corners.len() {
            return Err(Error::arg("trajectory and corner parameters disagree"));
        }
        let absorbed_power = absorbed_power_series(traj);
        let switches = corners
            .iter()
            .enumerate()
            .map(|(i, c)| switch_count(&Trajectory::corner_series(&traj.c_in, i), c, DEFAULT_SWITCH_THRESHOLD))
            .sum();
        Ok(Self {
            rms_accel: rms(&traj.accel)?,
            absorbed_power_final: absorbed_power_final(&absorbed_power, traj.dt, DEFAULT_POWER_WINDOW)?,
            switch_count: switches,
            absorbed_power,
        })
    }
}
