//! Continuous-time algebraic Riccati and Lyapunov equations.
//!
//! The stabilizing Riccati solution is read off the stable invariant
//! subspace of the Hamiltonian `[A, -G; -Q, -A']`. That subspace is obtained
//! from the matrix sign function (scaled Newton iteration), whose kernel of
//! `sign(H) + I` is exactly the stable subspace. The estimate is then
//! polished with Newton-Kleinman steps until the residual stops improving.

use nalgebra::DMatrix;

use super::linalg;
use crate::{Error, Result};

const SIGN_MAX_ITER: usize = 100;
const NEWTON_MAX_ITER: usize = 8;

/// Bound on [`relative_residual`] for solutions returned by [`solve_care`].
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;

/// Bound on [`scaled_residual`] for solutions returned by [`solve_riccati`].
pub const SCALED_RESIDUAL_TOL: f64 = 1e-8;

/// Stabilizing solution of `A'X + XA - X B R^-1 B' X + Q = 0`.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::arg("CARE: A must be square"));
    }
    if b.nrows() != n {
        return Err(Error::arg(format!("CARE: B must have {n} rows")));
    }
    let m = b.ncols();
    if q.shape() != (n, n) {
        return Err(Error::arg(format!("CARE: Q must be {n}x{n}")));
    }
    if r.shape() != (m, m) {
        return Err(Error::arg(format!("CARE: R must be {m}x{m}")));
    }
    check_symmetric(q, "Q")?;
    check_symmetric(r, "R")?;
    let r_inv = r
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::arg("CARE: R must be positive definite"))?;
    let g = linalg::symmetrize(&(b * r_inv * b.transpose()));
    let x = solve_riccati(a, &g, q)?;
    let res = relative_residual(a, &g, q, &x);
    if !(res <= CARE_RESIDUAL_TOL) {
        return Err(Error::CareUnsolvable(format!("residual {res:e} exceeds {CARE_RESIDUAL_TOL:e}")));
    }
    Ok(x)
}

/// Stabilizing solution of `A'X + XA - X G X + Q = 0` for symmetric `G`, `Q`
/// (`G` may be indefinite, as in the H-infinity Riccati equations).
pub fn solve_riccati(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || g.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::arg(format!("Riccati: A, G, Q must all be {n}x{n}")));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if [a, g, q].iter().any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(Error::arg("Riccati: non-finite coefficient"));
    }

    let h = hamiltonian(a, g, q);
    let spectrum = linalg::eigenvalues(&h)?;
    if let Some(l) = spectrum.iter().find(|l| linalg::on_imaginary_axis(**l)) {
        return Err(Error::CareUnsolvable(format!(
            "Hamiltonian eigenvalue {l:.3e} lies on the imaginary axis"
        )));
    }

    let w = matrix_sign(&h)?;
    // ker(sign(H) + I) = span [I; X]
    let eye = DMatrix::<f64>::identity(n, n);
    let w11 = w.view((0, 0), (n, n));
    let w12 = w.view((0, n), (n, n));
    let w21 = w.view((n, 0), (n, n));
    let w22 = w.view((n, n), (n, n));
    let lhs = linalg::blocks(&[&[&w12.into_owned()], &[&(w22 + &eye)]]);
    let rhs = -linalg::blocks(&[&[&(w11 + &eye)], &[&w21.into_owned()]]);
    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax.max(1.0)) {
        return Err(Error::CareUnsolvable(
            "stable invariant subspace is not a graph over the first block (no stabilizing solution)".into(),
        ));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::CareUnsolvable(format!("subspace projection failed: {e}")))?;
    let x = newton_polish(a, g, q, linalg::symmetrize(&x))?;

    let closed = a - g * &x;
    let abscissa = linalg::spectral_abscissa(&closed)?;
    if abscissa >= 0.0 {
        return Err(Error::CareUnsolvable(format!(
            "solution is not stabilizing (closed-loop abscissa {abscissa:e})"
        )));
    }
    let res = scaled_residual(a, g, q, &x);
    if !(res <= SCALED_RESIDUAL_TOL) {
        return Err(Error::CareUnsolvable(format!("scaled residual {res:e} exceeds {SCALED_RESIDUAL_TOL:e}")));
    }
    Ok(x)
}

pub fn hamiltonian(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::blocks(&[&[a, &-g], &[&-q, &-a.transpose()]])
}

pub fn riccati_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * x + x * a - x * g * x + q
}

/// `||A'X + XA - XGX + Q||_F / max(1, ||X||_F)`.
pub fn relative_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    linalg::frobenius(&riccati_residual(a, g, q, x)) / linalg::frobenius(x).max(1.0)
}

/// Residual relative to the size of the terms of the equation, which stays
/// meaningful when `Q` and `G` are far from unit scale.
pub fn scaled_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let xn = linalg::frobenius(x);
    let terms = linalg::frobenius(q) + 2.0 * linalg::frobenius(&(a.transpose() * x)) + linalg::frobenius(&(x * g * x));
    let res = linalg::frobenius(&riccati_residual(a, g, q, x));
    if terms == 0.0 {
        return if xn == 0.0 { 0.0 } else { res };
    }
    res / terms
}

fn newton_polish(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, mut x: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut res = relative_residual(a, g, q, &x);
    for _ in 0..NEWTON_MAX_ITER {
        if res <= 1e-14 {
            break;
        }
        let closed = a - g * &x;
        let Ok(delta) = solve_lyapunov(&closed, &riccati_residual(a, g, q, &x)) else {
            break;
        };
        let candidate = linalg::symmetrize(&(&x + delta));
        let cand_res = relative_residual(a, g, q, &candidate);
        if !(cand_res < res) {
            break;
        }
        x = candidate;
        res = cand_res;
    }
    Ok(x)
}

/// Solution of `F'X + XF + Q = 0` for Hurwitz `F`.
pub fn solve_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    if f.ncols() != n || q.shape() != (n, n) {
        return Err(Error::arg("Lyapunov: F and Q must be square and equally sized"));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // Sign iteration on the pair (F', Q): E_k -> -I, Q_k -> 2X.
    let mut e = f.transpose();
    let mut qk = q.clone();
    let mut scaling = true;
    for _ in 0..SIGN_MAX_ITER {
        let lu = e.clone().lu();
        let c = if scaling { det_scale(&lu, n) } else { 1.0 };
        let e_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::arg("Lyapunov: F has an eigenvalue at the origin"))?;
        let next_e = (&e * c + &e_inv / c) * 0.5;
        let next_q = (&qk * c + &e_inv * &qk * e_inv.transpose() / c) * 0.5;
        let change = (&next_e - &e).norm() / next_e.norm();
        e = next_e;
        qk = next_q;
        if change < 1e-2 {
            scaling = false;
        }
        if change <= 1e-14 {
            break;
        }
    }
    if !qk.iter().all(|v| v.is_finite()) {
        return Err(Error::arg("Lyapunov: iteration diverged (is F Hurwitz?)"));
    }
    if (&e + DMatrix::<f64>::identity(n, n)).norm() > 1e-6 * (n as f64) {
        return Err(Error::arg("Lyapunov: F is not Hurwitz"));
    }
    Ok(linalg::symmetrize(&(qk * 0.5)))
}

/// Matrix sign function by the determinant-scaled Newton iteration.
pub fn matrix_sign(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut z = m.clone();
    let mut scaling = true;
    let mut converged_steps = 0;
    let mut best_change = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let c = if scaling { det_scale(&lu, n) } else { 1.0 };
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::CareUnsolvable("sign iteration hit a singular iterate".into()))?;
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::CareUnsolvable("sign iteration diverged".into()));
        }
        if change < 1e-2 {
            scaling = false;
        }
        if change <= 1e-13 {
            // one extra sweep once quadratic convergence is reached
            converged_steps += 1;
            if converged_steps == 2 {
                return Ok(z);
            }
        }
        // rounding floor reached on an ill-conditioned iterate
        if !scaling {
            if change < best_change {
                best_change = change;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled == 3 {
                    break;
                }
            }
        }
    }
    // only a starting point for the Newton refinement, which has its own
    // residual check
    let defect = (&z * &z - DMatrix::<f64>::identity(n, n)).norm();
    if defect <= 1e-6 * (n as f64) {
        Ok(z)
    } else {
        Err(Error::CareUnsolvable(format!(
            "sign iteration did not converge (|S^2 - I| = {defect:e}); eigenvalues too close to the imaginary axis"
        )))
    }
}

fn det_scale(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, n: usize) -> f64 {
    let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
    let c = (-log_det / n as f64).exp();
    if c.is_finite() && c > 0.0 {
        c
    } else {
        1.0
    }
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * m.norm().max(1.0) {
        return Err(Error::arg(format!("CARE: {name} must be symmetric")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_care_closed_form() {
        // -2x - x^2 + 1 = 0, positive root
        let x = solve_care(&scalar(-1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((x[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_on_stable_system_gives_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let x = solve_care(&a, &b, &DMatrix::zeros(2, 2), &scalar(2.0)).unwrap();
        assert!(x.norm() < 1e-12, "{x}");
    }

    #[test]
    fn unstabilizable_pair_is_unsolvable() {
        // unstable mode 1 not reachable from B and not penalised: Hamiltonian
        // eigenvalues +-1 are fine but the stable subspace is not a graph
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::zeros(2, 2);
        let err = solve_care(&a, &b, &q, &scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::CareUnsolvable(_)), "{err:?}");
    }

    #[test]
    fn imaginary_axis_hamiltonian_is_reported() {
        // undamped oscillator, no input authority, no state weight
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = DMatrix::zeros(2, 1);
        let err = solve_care(&a, &b, &DMatrix::zeros(2, 2), &scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::CareUnsolvable(_)), "{err:?}");
    }

    #[test]
    fn dimension_mismatch_is_argument_error() {
        let err = solve_care(&scalar(-1.0), &DMatrix::zeros(2, 1), &scalar(1.0), &scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
        let err = solve_care(&scalar(-1.0), &scalar(1.0), &scalar(1.0), &scalar(-1.0)).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn lyapunov_matches_scalar_formula() {
        // -2x + 3 ... f = -2: -4x + q = 0
        let x = solve_lyapunov(&scalar(-2.0), &scalar(3.0)).unwrap();
        assert!((x[(0, 0)] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_residual_on_nonnormal_matrix() {
        let f = DMatrix::from_row_slice(3, 3, &[-1.0, 50.0, 0.0, 0.0, -2.0, 10.0, 0.0, 0.0, -0.5]);
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]);
        let x = solve_lyapunov(&f, &q).unwrap();
        let res = f.transpose() * &x + &x * &f + &q;
        assert!(res.norm() / x.norm() < 1e-12, "{}", res.norm());
    }

    #[test]
    fn indefinite_riccati_is_solved() {
        // H-infinity style: G = B2 B2' - gamma^-2 B1 B1'
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -0.4]);
        let b1 = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let b2 = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let g = &b2 * b2.transpose() - &b1 * b1.transpose() / 4.0;
        let q = DMatrix::identity(2, 2);
        let x = solve_riccati(&a, &g, &q).unwrap();
        assert!(relative_residual(&a, &g, &q, &x) < 1e-12);
        assert!(linalg::is_hurwitz(&(a - g * x)).unwrap());
    }
}
