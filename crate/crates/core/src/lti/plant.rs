use nalgebra::DMatrix;
use num_complex::Complex64;

use super::linalg;
use super::StateSpace;
use crate::{Error, Result};

/// Plant with partitioned inputs `[w; u]` and outputs `[z; y]`.
///
/// ```text
/// x' = A x  + B1 w  + B2 u
/// z  = C1 x + D11 w + D12 u
/// y  = C2 x + D21 w + D22 u
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPlant {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub d11: DMatrix<f64>,
    pub d12: DMatrix<f64>,
    pub d21: DMatrix<f64>,
    pub d22: DMatrix<f64>,
}

impl GeneralizedPlant {
    /// Partition `sys` with `nw` disturbance inputs (the rest are controls)
    /// and `nz` performance outputs (the rest are measurements).
    pub fn from_state_space(sys: &StateSpace, nw: usize, nz: usize) -> Result<Self> {
        let (m, p) = (sys.inputs(), sys.outputs());
        if nw > m || nz > p {
            return Err(Error::arg(format!(
                "partition ({nw} disturbances, {nz} performance outputs) exceeds plant size {p}x{m}"
            )));
        }
        let (nu, ny) = (m - nw, p - nz);
        Self {
            a: sys.a.clone(),
            b1: sys.b.columns(0, nw).into_owned(),
            b2: sys.b.columns(nw, nu).into_owned(),
            c1: sys.c.rows(0, nz).into_owned(),
            c2: sys.c.rows(nz, ny).into_owned(),
            d11: sys.d.view((0, 0), (nz, nw)).into_owned(),
            d12: sys.d.view((0, nw), (nz, nu)).into_owned(),
            d21: sys.d.view((nz, 0), (ny, nw)).into_owned(),
            d22: sys.d.view((nz, nw), (ny, nu)).into_owned(),
        }
        .checked()
    }

    fn checked(self) -> Result<Self> {
        let n = self.a.nrows();
        let (nw, nu, nz, ny) = self.dims();
        let ok = self.a.ncols() == n
            && self.b1.nrows() == n
            && self.b2.nrows() == n
            && self.c1.ncols() == n
            && self.c2.ncols() == n
            && self.d11.shape() == (nz, nw)
            && self.d12.shape() == (nz, nu)
            && self.d21.shape() == (ny, nw)
            && self.d22.shape() == (ny, nu);
        if !ok {
            return Err(Error::arg("generalized plant blocks have inconsistent dimensions"));
        }
        Ok(self)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c1: DMatrix<f64>,
        c2: DMatrix<f64>,
        d11: DMatrix<f64>,
        d12: DMatrix<f64>,
        d21: DMatrix<f64>,
        d22: DMatrix<f64>,
    ) -> Result<Self> {
        let plant = Self { a, b1, b2, c1, c2, d11, d12, d21, d22 }.checked()?;
        plant.as_state_space()?; // finiteness
        Ok(plant)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `(w width, u width, z height, y height)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.b1.ncols(), self.b2.ncols(), self.c1.nrows(), self.c2.nrows())
    }

    pub fn as_state_space(&self) -> Result<StateSpace> {
        StateSpace::new(
            self.a.clone(),
            linalg::blocks(&[&[&self.b1, &self.b2]]),
            linalg::blocks(&[&[&self.c1], &[&self.c2]]),
            linalg::blocks(&[&[&self.d11, &self.d12], &[&self.d21, &self.d22]]),
        )
    }

    /// Open-loop `w -> z` channel.
    pub fn performance_channel(&self) -> Result<StateSpace> {
        StateSpace::new(self.a.clone(), self.b1.clone(), self.c1.clone(), self.d11.clone())
    }

    /// Checks the regularity assumptions of output-feedback synthesis,
    /// naming the first one that fails.
    pub fn check_regular(&self) -> Result<()> {
        let (nw, nu, nz, ny) = self.dims();
        if nu == 0 || ny == 0 {
            return Err(Error::PlantIrregular("plant has no control inputs or no measurements".into()));
        }
        if nu > nz || linalg::rank(&self.d12) < nu {
            return Err(Error::PlantIrregular(format!(
                "D12 ({nz}x{nu}) does not have full column rank"
            )));
        }
        if ny > nw || linalg::rank(&self.d21) < ny {
            return Err(Error::PlantIrregular(format!("D21 ({ny}x{nw}) does not have full row rank")));
        }
        let n = self.order();
        let a_c = linalg::to_complex(&self.a);
        for lambda in linalg::eigenvalues(&self.a)? {
            if lambda.re < -linalg::IMAG_AXIS_TOL * lambda.norm().max(1.0) {
                continue;
            }
            let shifted = &a_c - DMatrix::<Complex64>::identity(n, n) * lambda;
            let ctrb = linalg::blocks(&[&[&shifted, &linalg::to_complex(&self.b2)]]);
            if linalg::rank_c(&ctrb) < n {
                return Err(Error::PlantIrregular(format!(
                    "(A, B2) is not stabilizable: mode {lambda:.4} is uncontrollable"
                )));
            }
            let obsv = linalg::blocks(&[&[&shifted], &[&linalg::to_complex(&self.c2)]]);
            if linalg::rank_c(&obsv) < n {
                return Err(Error::PlantIrregular(format!(
                    "(C2, A) is not detectable: mode {lambda:.4} is unobservable"
                )));
            }
        }
        Ok(())
    }
}

/// Lower LFT `F_l(P, K)`: closed loop from `w` to `z` under `u = K y`.
/// State ordering is `[plant; controller]`.
pub fn lft_closed_loop(plant: &GeneralizedPlant, k: &StateSpace) -> Result<StateSpace> {
    let (_, nu, _, ny) = plant.dims();
    if k.inputs() != ny || k.outputs() != nu {
        return Err(Error::arg(format!(
            "controller is {}x{} but the plant needs {nu}x{ny}",
            k.outputs(),
            k.inputs()
        )));
    }
    let loop_gain = DMatrix::<f64>::identity(nu, nu) - &k.d * &plant.d22;
    let m = match loop_gain.clone().try_inverse() {
        Some(m) if m.iter().all(|v| v.is_finite()) && loop_gain.rank(1e-12) == nu => m,
        _ => return Err(Error::IllPosedInterconnection),
    };
    // u = M (DK C2 x + CK xk + DK D21 w)
    let u_x = &m * &k.d * &plant.c2;
    let u_xk = &m * &k.c;
    let u_w = &m * &k.d * &plant.d21;
    // y = C2 x + D21 w + D22 u
    let y_x = &plant.c2 + &plant.d22 * &u_x;
    let y_xk = &plant.d22 * &u_xk;
    let y_w = &plant.d21 + &plant.d22 * &u_w;

    let a = linalg::blocks(&[
        &[&(&plant.a + &plant.b2 * &u_x), &(&plant.b2 * &u_xk)],
        &[&(&k.b * &y_x), &(&k.a + &k.b * &y_xk)],
    ]);
    let b = linalg::blocks(&[&[&(&plant.b1 + &plant.b2 * &u_w)], &[&(&k.b * &y_w)]]);
    let c = linalg::blocks(&[&[&(&plant.c1 + &plant.d12 * &u_x), &(&plant.d12 * &u_xk)]]);
    let d = &plant.d11 + &plant.d12 * &u_w;
    StateSpace::new(a, b, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> GeneralizedPlant {
        GeneralizedPlant::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.3]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap()
    }

    #[test]
    fn zero_controller_gives_open_loop_channel() {
        let p = toy();
        let cl = lft_closed_loop(&p, &StateSpace::zero(1, 1)).unwrap();
        assert_eq!(cl, p.performance_channel().unwrap());
    }

    #[test]
    fn static_gain_without_d22() {
        let mut p = toy();
        p.d22 = DMatrix::zeros(1, 1);
        let dk = DMatrix::from_element(1, 1, -3.0);
        let cl = lft_closed_loop(&p, &StateSpace::gain(dk.clone()).unwrap()).unwrap();
        let expected = &p.a + &p.b2 * dk * &p.c2;
        assert_eq!(cl.a, expected);
    }

    #[test]
    fn algebraic_loop_is_rejected() {
        let p = toy(); // D22 = 0.5
        let k = StateSpace::gain(DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(lft_closed_loop(&p, &k).unwrap_err(), Error::IllPosedInterconnection);
    }

    #[test]
    fn controller_shape_mismatch() {
        let p = toy();
        assert!(matches!(lft_closed_loop(&p, &StateSpace::zero(2, 1)), Err(Error::Argument(_))));
    }

    #[test]
    fn regularity_failures_are_named() {
        let mut p = toy();
        p.d12 = DMatrix::zeros(2, 1);
        let msg = p.check_regular().unwrap_err().to_string();
        assert!(msg.contains("D12"), "{msg}");
        let mut p = toy();
        p.d21 = DMatrix::zeros(1, 2);
        let msg = p.check_regular().unwrap_err().to_string();
        assert!(msg.contains("D21"), "{msg}");
        let mut p = toy();
        p.a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        p.b2 = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let msg = p.check_regular().unwrap_err().to_string();
        assert!(msg.contains("stabilizable"), "{msg}");
    }
}
