//! Output-feedback H-infinity synthesis (two-Riccati, central controller).
//!
//! The plant is first brought to the normalized form `D12 = [0; I]`,
//! `D21 = [0, I]` by orthogonal output/disturbance rotations and invertible
//! input/measurement scalings, and `D22` is removed by a loop shift. The
//! gamma test then checks the four classical conditions:
//!
//! 1. `gamma` exceeds the `D11` bound (row/column blocks that no controller
//!    can influence),
//! 2. the X Hamiltonian has a stabilizing solution `X >= 0`,
//! 3. the Y Hamiltonian has a stabilizing solution `Y >= 0`,
//! 4. `rho(X Y) < gamma^2`,
//!
//! with `D11` handled in full generality. The central controller of the
//! resulting parameterization (free parameter `Q = 0`) is returned.

use nalgebra::DMatrix;

use super::linalg::{self, blocks};
use super::riccati::solve_riccati;
use super::{lft_closed_loop, GeneralizedPlant, StateSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Relative width of the final gamma bracket.
    pub gamma_tol: f64,
    /// Upper end of the bisection bracket.
    pub gamma_max: f64,
    /// The controller is built at `backoff * gamma_opt` (>= 1). Values
    /// above one trade optimality for a better conditioned, slower
    /// controller.
    pub backoff: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { gamma_tol: 1e-3, gamma_max: 1e6, backoff: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HinfController {
    pub k: StateSpace,
    /// Gamma the controller was constructed for; the closed-loop norm is
    /// bounded by it.
    pub gamma_achieved: f64,
    /// Infimal feasible gamma found by the bisection (upper end of the
    /// final bracket).
    pub gamma_opt: f64,
}

pub fn synthesize_hinf(plant: &GeneralizedPlant, gamma_tol: f64) -> Result<HinfController> {
    synthesize_hinf_with(plant, &SynthesisOptions { gamma_tol, ..Default::default() })
}

pub fn synthesize_hinf_with(plant: &GeneralizedPlant, opts: &SynthesisOptions) -> Result<HinfController> {
    if !(opts.gamma_tol > 0.0 && opts.gamma_tol < 1.0) {
        return Err(Error::arg(format!("gamma_tol must lie in (0, 1), got {}", opts.gamma_tol)));
    }
    if !(opts.gamma_max > 0.0) || !(opts.backoff >= 1.0) {
        return Err(Error::arg("gamma_max must be positive and backoff >= 1"));
    }
    plant.check_regular()?;
    let norm = Normalized::new(plant)?;

    let floor = norm.d11_bound();
    let mut hi = opts.gamma_max;
    if hi <= floor || norm.solve_at(hi).is_none() {
        return Err(Error::SynthesisInfeasible { gamma_max: opts.gamma_max });
    }
    let mut lo = if floor > 0.0 { floor } else { opts.gamma_max * 1e-9 };
    if floor == 0.0 && norm.solve_at(lo).is_some() {
        hi = lo;
    }
    while hi > lo * (1.0 + opts.gamma_tol) {
        let mid = (lo * hi).sqrt();
        if norm.solve_at(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gamma_opt = hi;

    // Central-controller formulas lose accuracy right at the optimum; step
    // up inside the tolerance band until the closed loop verifies.
    let mut gamma = gamma_opt * opts.backoff;
    for _ in 0..40 {
        if let Some(sol) = norm.solve_at(gamma) {
            if let Ok(k) = norm.controller(&sol, plant) {
                let cl = lft_closed_loop(plant, &k);
                if matches!(cl.map(|c| c.is_stable()), Ok(Ok(true))) {
                    return Ok(HinfController { k, gamma_achieved: gamma, gamma_opt });
                }
            }
        }
        gamma *= 1.0 + opts.gamma_tol / 4.0;
    }
    Err(Error::SynthesisInfeasible { gamma_max: opts.gamma_max })
}

/// Plant in normalized coordinates (`D12 = [0; I]`, `D21 = [0, I]`, `D22 = 0`)
/// together with the maps back to the original input/measurement units.
struct Normalized {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    d11: DMatrix<f64>,
    d12: DMatrix<f64>,
    d21: DMatrix<f64>,
    /// `u = u_scale * u_normalized`
    u_scale: DMatrix<f64>,
    /// `y_normalized = y_scale * y`
    y_scale: DMatrix<f64>,
    m1: usize,
    m2: usize,
    p1: usize,
    p2: usize,
}

struct Solution {
    gamma: f64,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl Normalized {
    fn new(plant: &GeneralizedPlant) -> Result<Self> {
        let (m1, m2, p1, p2) = plant.dims();

        let theta_z = linalg::ascending_eigenbasis(&(&plant.d12 * plant.d12.transpose()));
        let r12 = theta_z.columns(p1 - m2, m2).transpose() * &plant.d12;
        let u_scale = linalg::inverse(&r12, "D12 range block").map_err(irregular)?;

        let theta_w = linalg::ascending_eigenbasis(&(plant.d21.transpose() * &plant.d21));
        let r21 = &plant.d21 * theta_w.columns(m1 - p2, p2);
        let y_scale = linalg::inverse(&r21, "D21 range block").map_err(irregular)?;

        let mut d12 = DMatrix::zeros(p1, m2);
        d12.view_mut((p1 - m2, 0), (m2, m2)).fill_with_identity();
        let mut d21 = DMatrix::zeros(p2, m1);
        d21.view_mut((0, m1 - p2), (p2, p2)).fill_with_identity();

        Ok(Self {
            a: plant.a.clone(),
            b1: &plant.b1 * &theta_w,
            b2: &plant.b2 * &u_scale,
            c1: theta_z.transpose() * &plant.c1,
            c2: &y_scale * &plant.c2,
            d11: theta_z.transpose() * &plant.d11 * &theta_w,
            d12,
            d21,
            u_scale,
            y_scale,
            m1,
            m2,
            p1,
            p2,
        })
    }

    /// `(D1111, D1112, D1121, D1122)`
    fn d11_blocks(&self) -> [DMatrix<f64>; 4] {
        let (r, c) = (self.p1 - self.m2, self.m1 - self.p2);
        let d = &self.d11;
        [
            d.view((0, 0), (r, c)).into_owned(),
            d.view((0, c), (r, self.p2)).into_owned(),
            d.view((r, 0), (self.m2, c)).into_owned(),
            d.view((r, c), (self.m2, self.p2)).into_owned(),
        ]
    }

    /// Lower bound on any achievable gamma from the uncontrollable part of D11.
    fn d11_bound(&self) -> f64 {
        let [d1111, d1112, d1121, _] = self.d11_blocks();
        let row = blocks(&[&[&d1111, &d1112]]);
        let col = blocks(&[&[&d1111], &[&d1121]]);
        linalg::max_singular_value(&row).max(linalg::max_singular_value(&col))
    }

    fn b(&self) -> DMatrix<f64> {
        blocks(&[&[&self.b1, &self.b2]])
    }

    fn c(&self) -> DMatrix<f64> {
        blocks(&[&[&self.c1], &[&self.c2]])
    }

    fn d1_row(&self) -> DMatrix<f64> {
        blocks(&[&[&self.d11, &self.d12]])
    }

    fn d1_col(&self) -> DMatrix<f64> {
        blocks(&[&[&self.d11], &[&self.d21]])
    }

    /// `D1.' D1. - diag(gamma^2 I, 0)`
    fn r_x(&self, gamma: f64) -> DMatrix<f64> {
        let d1 = self.d1_row();
        let mut r = d1.transpose() * d1;
        for i in 0..self.m1 {
            r[(i, i)] -= gamma * gamma;
        }
        r
    }

    /// `D.1 D.1' - diag(gamma^2 I, 0)`
    fn r_y(&self, gamma: f64) -> DMatrix<f64> {
        let d1 = self.d1_col();
        let mut r = &d1 * d1.transpose();
        for i in 0..self.p1 {
            r[(i, i)] -= gamma * gamma;
        }
        r
    }

    fn solve_at(&self, gamma: f64) -> Option<Solution> {
        if gamma <= self.d11_bound() * (1.0 + 1e-12) {
            return None;
        }
        let n = self.a.nrows();
        let (b, c) = (self.b(), self.c());

        let d1 = self.d1_row();
        let r_inv = linalg::inverse(&self.r_x(gamma), "R").ok()?;
        let ax = &self.a - &b * &r_inv * d1.transpose() * &self.c1;
        let gx = linalg::symmetrize(&(&b * &r_inv * b.transpose()));
        let qx = linalg::symmetrize(
            &(self.c1.transpose() * (DMatrix::identity(self.p1, self.p1) - &d1 * &r_inv * d1.transpose()) * &self.c1),
        );
        let x = solve_riccati(&ax, &gx, &qx).ok()?;
        if !is_psd(&x) {
            return None;
        }

        let d1c = self.d1_col();
        let rt_inv = linalg::inverse(&self.r_y(gamma), "R~").ok()?;
        let ay = self.a.transpose() - c.transpose() * &rt_inv * &d1c * self.b1.transpose();
        let gy = linalg::symmetrize(&(c.transpose() * &rt_inv * &c));
        let qy = linalg::symmetrize(
            &(&self.b1 * (DMatrix::identity(self.m1, self.m1) - d1c.transpose() * &rt_inv * &d1c) * self.b1.transpose()),
        );
        let y = solve_riccati(&ay, &gy, &qy).ok()?;
        if !is_psd(&y) {
            return None;
        }

        let rho = if n == 0 {
            0.0
        } else {
            linalg::eigenvalues(&(&x * &y)).ok()?.iter().map(|l| l.norm()).fold(0.0, f64::max)
        };
        (rho < gamma * gamma).then_some(Solution { gamma, x, y })
    }

    /// Central controller in original plant units (including the D22 loop).
    fn controller(&self, sol: &Solution, plant: &GeneralizedPlant) -> Result<StateSpace> {
        let Solution { gamma, x, y } = sol;
        let g2 = gamma * gamma;
        let n = self.a.nrows();
        let (m1, m2, p1, p2) = (self.m1, self.m2, self.p1, self.p2);
        let (b, c) = (self.b(), self.c());

        let f = -linalg::inverse(&self.r_x(*gamma), "R")? * (self.d1_row().transpose() * &self.c1 + b.transpose() * x);
        let l = -(&self.b1 * self.d1_col().transpose() + y * c.transpose())
            * linalg::inverse(&self.r_y(*gamma), "R~")?;
        let f12 = f.rows(m1 - p2, p2).into_owned();
        let f2 = f.rows(m1, m2).into_owned();
        let l12 = l.columns(p1 - m2, m2).into_owned();
        let l2 = l.columns(p1, p2).into_owned();

        let [d1111, d1112, d1121, d1122] = self.d11_blocks();
        let (r, cdim) = (p1 - m2, m1 - p2);
        let inner_row = linalg::inverse(&(DMatrix::identity(r, r) * g2 - &d1111 * d1111.transpose()), "gamma^2 I - D1111 D1111'")?;
        let inner_col =
            linalg::inverse(&(DMatrix::identity(cdim, cdim) * g2 - d1111.transpose() * &d1111), "gamma^2 I - D1111' D1111")?;
        let dh11 = -(&d1121 * d1111.transpose() * &inner_row * &d1112) - &d1122;
        let dh12 = cholesky_lower(&(DMatrix::identity(m2, m2) - &d1121 * &inner_col * d1121.transpose()))?;
        let dh21 =
            cholesky_lower(&(DMatrix::identity(p2, p2) - d1112.transpose() * &inner_row * &d1112))?.transpose();
        let dh12_inv = linalg::inverse(&dh12, "D^12")?;
        let dh21_inv = linalg::inverse(&dh21, "D^21")?;

        let z = linalg::inverse(&(DMatrix::identity(n, n) - y * x / g2), "I - Y X / gamma^2")?;
        let bh2 = &z * (&self.b2 + &l12) * &dh12;
        let ch2 = -&dh21 * (&self.c2 + &f12);
        let bh1 = -&z * &l2 + &bh2 * &dh12_inv * &dh11;
        let ch1 = &f2 + &dh11 * &dh21_inv * &ch2;
        let ah = &self.a + &b * &f + &bh1 * &dh21_inv * &ch2;

        // back to original units: u = Su u~, y~ = Sy y
        let ak = ah;
        let bk = bh1 * &self.y_scale;
        let ck = &self.u_scale * ch1;
        let dk = &self.u_scale * dh11 * &self.y_scale;

        // loop shift: the design assumed y0 = y - D22 u
        let d22 = &plant.d22;
        let m = linalg::inverse(&(DMatrix::identity(m2, m2) + &dk * d22), "I + DK D22")?;
        StateSpace::new(
            &ak - &bk * d22 * &m * &ck,
            &bk - &bk * d22 * &m * &dk,
            &m * &ck,
            &m * &dk,
        )
    }
}

fn irregular(e: Error) -> Error {
    Error::PlantIrregular(e.to_string())
}

fn is_psd(x: &DMatrix<f64>) -> bool {
    if x.nrows() == 0 {
        return true;
    }
    let eig = nalgebra::SymmetricEigen::new(x.clone()).eigenvalues;
    let scale = eig.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    eig.iter().all(|&v| v >= -1e-9 * scale)
}

fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    m.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::arg("feedthrough factor is not positive definite"))
}
