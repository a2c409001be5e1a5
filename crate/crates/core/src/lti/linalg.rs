//! Small dense helpers shared by the Riccati, norm and synthesis code.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::{Error, Result};

/// Relative threshold for "eigenvalue on the imaginary axis".
pub const IMAG_AXIS_TOL: f64 = 1e-8;

pub fn on_imaginary_axis(lambda: Complex64) -> bool {
    lambda.re.abs() <= IMAG_AXIS_TOL * lambda.norm().max(1.0)
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("eigenvalues of a non-finite matrix"));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * m.nrows().max(10))
        .ok_or_else(|| Error::arg("real Schur iteration did not converge"))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part of the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> Result<bool> {
    Ok(spectral_abscissa(m)? < 0.0)
}

pub fn max_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn max_singular_value_c(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Numerical rank with tolerance relative to the largest singular value.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let tol = 1e-10 * sv.max().max(f64::MIN_POSITIVE);
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn rank_c(m: &DMatrix<Complex64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let tol = 1e-10 * sv.max().max(f64::MIN_POSITIVE);
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::arg(format!("{what} is singular")))
}

/// Assemble a dense matrix from a grid of blocks. Row heights are taken from
/// the first block of each row, column widths from the first block row.
pub fn blocks<T: nalgebra::ComplexField>(grid: &[&[&DMatrix<T>]]) -> DMatrix<T> {
    let heights: Vec<usize> = grid.iter().map(|row| row[0].nrows()).collect();
    let widths: Vec<usize> = grid[0].iter().map(|b| b.ncols()).collect();
    let mut out = DMatrix::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (row, &h) in grid.iter().zip(&heights) {
        let mut c0 = 0;
        for (blk, &w) in row.iter().zip(&widths) {
            debug_assert_eq!((blk.nrows(), blk.ncols()), (h, w), "block shape mismatch");
            out.view_mut((r0, c0), (h, w)).copy_from(*blk);
            c0 += w;
        }
        r0 += h;
    }
    out
}

/// Orthonormal eigenbasis of a symmetric matrix, columns ordered by ascending
/// eigenvalue. For a Gram matrix of rank r the last r columns span its range.
pub fn ascending_eigenbasis(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gram.nrows();
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut basis = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        basis.set_column(k, &eig.eigenvectors.column(i));
    }
    basis
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}
