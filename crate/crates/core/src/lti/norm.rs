//! H-infinity norm by bisection on the Hamiltonian imaginary-axis test.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::linalg;
use super::StateSpace;
use crate::{Error, Result};

/// `||sys||_inf` to relative tolerance `tol`.
///
/// The returned value `g` satisfies: `g * (1 + tol)` passes
/// [`is_norm_upper_bound`] and `g * (1 - tol)` fails it.
pub fn hinf_norm(sys: &StateSpace, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::arg(format!("norm tolerance must lie in (0, 1), got {tol}")));
    }
    let abscissa = linalg::spectral_abscissa(&sys.a)?;
    if abscissa >= 0.0 {
        return Err(Error::UnboundedNorm { abscissa });
    }
    let d_norm = linalg::max_singular_value(&sys.d);
    if sys.order() == 0 || sys.b.iter().all(|v| *v == 0.0) || sys.c.iter().all(|v| *v == 0.0) {
        return Ok(d_norm);
    }

    let mut lo = d_norm;
    for omega in probe_frequencies(sys)? {
        lo = lo.max(linalg::max_singular_value_c(&sys.freq_response(omega)?));
    }
    if lo == 0.0 {
        let tiny = f64::MIN_POSITIVE.sqrt();
        if is_norm_upper_bound(sys, tiny)? {
            return Ok(0.0);
        }
        lo = tiny;
    }

    let mut hi = 2.0 * lo;
    while !is_norm_upper_bound(sys, hi)? {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::UnboundedNorm { abscissa });
        }
    }
    while hi > lo * (1.0 + tol) {
        let mid = (lo * hi).sqrt();
        if is_norm_upper_bound(sys, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// True iff `gamma > ||sys||_inf` (for Hurwitz `A`): the Hamiltonian
/// associated with `gamma` has no eigenvalues on the imaginary axis.
pub fn is_norm_upper_bound(sys: &StateSpace, gamma: f64) -> Result<bool> {
    let m = sys.inputs();
    let p = sys.outputs();
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    if gamma <= linalg::max_singular_value(d) {
        return Ok(false);
    }
    if sys.order() == 0 {
        return Ok(true);
    }
    let g2 = gamma * gamma;
    let r = DMatrix::<f64>::identity(m, m) * g2 - d.transpose() * d;
    let r_inv = linalg::inverse(&r, "gamma^2 I - D'D")?;
    let s = DMatrix::<f64>::identity(p, p) + d * &r_inv * d.transpose();
    let a_h = a + b * &r_inv * d.transpose() * c;
    let h = linalg::blocks(&[
        &[&a_h, &(b * &r_inv * b.transpose())],
        &[&-(c.transpose() * s * c), &-a_h.transpose()],
    ]);
    Ok(!linalg::eigenvalues(&h)?.into_iter().any(linalg::on_imaginary_axis))
}

fn probe_frequencies(sys: &StateSpace) -> Result<Vec<f64>> {
    let mut freqs = vec![0.0];
    for lambda in linalg::eigenvalues(&sys.a)? {
        let w: Complex64 = lambda;
        if w.im.abs() > 0.0 {
            freqs.push(w.im.abs());
        }
        freqs.push(w.norm());
    }
    Ok(freqs)
}
