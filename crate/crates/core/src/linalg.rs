use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix, reused for many solves.
pub(crate) struct SymmetricSolver {
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    condition: f64,
}

impl SymmetricSolver {
    /// Fails when the condition number (ratio of extreme absolute
    /// eigenvalues) exceeds `max_condition`, or when `positive` is set and
    /// some eigenvalue is not strictly positive.
    pub fn new(m: &DMatrix<f64>, max_condition: f64, positive: bool) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let sym = (m + m.transpose()) * 0.5;
        let eigen = SymmetricEigen::new(sym);
        let abs_max = eigen.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let abs_min = eigen.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let condition = if abs_min > 0.0 {
            abs_max / abs_min
        } else {
            f64::INFINITY
        };
        let min = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if condition > max_condition || (positive && min <= 0.0) {
            return Err(Error::Singular { condition });
        }
        Ok(Self { eigen, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let q = &self.eigen.eigenvectors;
        let mut c = q.tr_mul(rhs);
        for (ci, l) in c.iter_mut().zip(self.eigen.eigenvalues.iter()) {
            *ci /= l;
        }
        q * c
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let q = &self.eigen.eigenvectors;
        let inv = DMatrix::from_diagonal(&self.eigen.eigenvalues.map(|l| 1.0 / l));
        let out = q * inv * q.transpose();
        (&out + out.transpose()) * 0.5
    }
}
