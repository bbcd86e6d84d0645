//! A consistent linear system `Ax = b`, optionally with its known
//! solution, plus the cached squared row norms the projection step and
//! the sampling law both divide by.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{distance, dot, norm, norm_inf, DenseMatrix};

/// Relative slack allowed between `A * truth` and `b` at construction.
pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearSystem {
    matrix: DenseMatrix,
    rhs: Vec<f64>,
    truth: Option<Vec<f64>>,
    row_norms_sq: Vec<f64>,
}

impl LinearSystem {
    /// Validates shape (`m >= n`), finiteness, the no-zero-row
    /// requirement, and, when `truth` is supplied, consistency
    /// `||A*truth - b|| <= 1e-10 * (1 + ||b||)`.
    pub fn new(matrix: DenseMatrix, rhs: Vec<f64>, truth: Option<Vec<f64>>) -> Result<Self> {
        if matrix.rows() < matrix.cols() {
            return Err(Error::Underdetermined {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        if rhs.len() != matrix.rows() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has length {}, expected {}",
                rhs.len(),
                matrix.rows()
            )));
        }
        if let Some(bad) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                row: bad,
                col: 0,
                value: rhs[bad],
            });
        }
        let row_norms_sq = matrix.row_norms_sq();
        if let Some(zero) = row_norms_sq.iter().position(|&v| v <= 0.0) {
            return Err(Error::ZeroRow(zero));
        }
        if let Some(x) = &truth {
            if x.len() != matrix.cols() {
                return Err(Error::DimensionMismatch(format!(
                    "truth has length {}, expected {}",
                    x.len(),
                    matrix.cols()
                )));
            }
            if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEntry {
                    row: bad,
                    col: 0,
                    value: x[bad],
                });
            }
            let residual = distance(&matrix.matvec(x), &rhs);
            let limit = CONSISTENCY_TOL * (1.0 + norm(&rhs));
            if residual > limit {
                return Err(Error::InconsistentTruth { residual, limit });
            }
        }
        Ok(LinearSystem {
            matrix,
            rhs,
            truth,
            row_norms_sq,
        })
    }

    /// Builds the right-hand side as `A * truth`, guaranteeing
    /// consistency by construction.
    pub fn from_truth(matrix: DenseMatrix, truth: Vec<f64>) -> Result<Self> {
        if truth.len() != matrix.cols() {
            return Err(Error::DimensionMismatch(format!(
                "truth has length {}, expected {}",
                truth.len(),
                matrix.cols()
            )));
        }
        let rhs = matrix.matvec(&truth);
        Self::new(matrix, rhs, Some(truth))
    }

    #[inline]
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    #[inline]
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    #[inline]
    pub fn truth(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn unknowns(&self) -> usize {
        self.matrix.cols()
    }

    #[inline]
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norms_sq[i]
    }

    #[inline]
    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    /// `||A x - b||`.
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        distance(&self.matrix.matvec(x), &self.rhs)
    }

    /// `||A x - b||_inf`.
    pub fn residual_norm_inf(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let diff: Vec<f64> = ax.iter().zip(&self.rhs).map(|(a, b)| a - b).collect();
        norm_inf(&diff)
    }

    /// `||x - truth||` when the solution is known.
    pub fn error_norm(&self, x: &[f64]) -> Option<f64> {
        self.truth.as_ref().map(|t| distance(x, t))
    }

    /// Signed gap `b_i - <a_i, x>` for one equation.
    #[inline]
    pub fn equation_gap(&self, i: usize, x: &[f64]) -> f64 {
        self.rhs[i] - dot(self.matrix.row(i), x)
    }
}
