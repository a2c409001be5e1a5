use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linalg;
use crate::{Error, Result};

/// Continuous-time LTI realization `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::arg(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::arg(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::arg(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::arg(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        if [&a, &b, &c, &d].iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::arg("state-space matrices must be finite"));
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless gain `y = D u`.
    pub fn gain(d: DMatrix<f64>) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, m), DMatrix::zeros(p, 0), d)
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::gain(DMatrix::zeros(outputs, inputs)).expect("zero gain is well formed")
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_stable(&self) -> Result<bool> {
        linalg::is_hurwitz(&self.a)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.a)
    }

    /// Transfer matrix `C (sI - A)^-1 B + D` at a complex frequency.
    pub fn eval(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.order();
        let d = linalg::to_complex(&self.d);
        if n == 0 {
            return Ok(d);
        }
        let resolvent = DMatrix::<Complex64>::identity(n, n) * s - linalg::to_complex(&self.a);
        let lu = resolvent.lu();
        let x = lu
            .solve(&linalg::to_complex(&self.b))
            .ok_or_else(|| Error::arg(format!("s = {s} is a pole of the system")))?;
        Ok(linalg::to_complex(&self.c) * x + d)
    }

    pub fn freq_response(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        self.eval(Complex64::new(0.0, omega))
    }

    /// Derivative of the state for input `u`.
    pub fn state_derivative(&self, x: &nalgebra::DVector<f64>, u: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &nalgebra::DVector<f64>, u: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.c * x + &self.d * u
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RealizationDoc::from(self)).expect("realization serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RealizationDoc =
            serde_json::from_str(text).map_err(|e| Error::arg(format!("realization JSON: {e}")))?;
        doc.try_into()
    }
}

/// Row-major dense matrix as stored in realization documents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixDoc {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        MatrixDoc { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl TryFrom<&MatrixDoc> for DMatrix<f64> {
    type Error = Error;

    fn try_from(doc: &MatrixDoc) -> Result<Self> {
        if doc.data.len() != doc.rows * doc.cols {
            return Err(Error::arg(format!(
                "matrix declares {}x{} but holds {} entries",
                doc.rows,
                doc.cols,
                doc.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(doc.rows, doc.cols, &doc.data))
    }
}

/// JSON document holding a realization: `{"a": {rows, cols, data}, "b": ..., "c": ..., "d": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RealizationDoc {
    pub a: MatrixDoc,
    pub b: MatrixDoc,
    pub c: MatrixDoc,
    pub d: MatrixDoc,
}

impl From<&StateSpace> for RealizationDoc {
    fn from(ss: &StateSpace) -> Self {
        RealizationDoc {
            a: (&ss.a).into(),
            b: (&ss.b).into(),
            c: (&ss.c).into(),
            d: (&ss.d).into(),
        }
    }
}

impl TryFrom<RealizationDoc> for StateSpace {
    type Error = Error;

    fn try_from(doc: RealizationDoc) -> Result<Self> {
        StateSpace::new(
            (&doc.a).try_into()?,
            (&doc.b).try_into()?,
            (&doc.c).try_into()?,
            (&doc.d).try_into()?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_dimensions() {
        let err = StateSpace::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(err, Err(Error::Argument(_))));
        let err = StateSpace::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(2, 1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_non_finite_entries() {
        let a = DMatrix::from_element(1, 1, f64::NAN);
        assert!(StateSpace::new(a, DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn first_order_lag_dc_gain() {
        let ss = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let g = ss.freq_response(0.0).unwrap();
        assert!((g[(0, 0)].re - 1.0).abs() < 1e-15);
        let g = ss.freq_response(1.0).unwrap();
        assert!((g[(0, 0)].norm() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_is_row_major() {
        let ss = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]).map(|v| -v),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let text = ss.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["a"]["data"], serde_json::json!([-1.0, -2.0, -3.0, -4.0]));
        assert_eq!(StateSpace::from_json(&text).unwrap(), ss);
    }

    #[test]
    fn json_length_mismatch_is_rejected() {
        let text = r#"{"a":{"rows":1,"cols":1,"data":[]},"b":{"rows":1,"cols":1,"data":[1]},
                       "c":{"rows":1,"cols":1,"data":[1]},"d":{"rows":1,"cols":1,"data":[0]}}"#;
        assert!(StateSpace::from_json(text).is_err());
    }
}
