//! Dense symmetric eigensolver on nalgebra matrices.
//!
//! Backed by faer: nalgebra's `SymmetricEigen` returns inaccurate
//! decompositions for some tridiagonal inputs without reporting failure.

use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> Result<Mat<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidModel(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    Ok(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]))
}

pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    let n = m.nrows();
    let e = to_faer(m)?
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("symmetric eigensolver: {e:?}")))?;
    let s = e.S().column_vector();
    let u = e.U();
    Ok(SymEigen { values: (0..n).map(|i| s[i]).collect(), vectors: DMatrix::from_fn(n, n, |i, j| u[(i, j)]) })
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    to_faer(m)?
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("symmetric eigensolver: {e:?}")))
}
