//! Dense row-major matrix storage and the structured generators used
//! throughout the crate.
//!
//! The iteration kernel reads whole rows, so storage is row-major `f64`
//! and `row()` hands out a contiguous slice. Entries are validated to be
//! finite at construction; every operation downstream relies on that.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix, row-major, double precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row slices, validating shape and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Builds a matrix from a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "buffer holds {} values, expected {}x{}={}",
                data.len(),
                rows,
                cols,
                rows * cols
            )));
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: idx / cols,
                    col: idx % cols,
                    value: v,
                });
            }
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix by evaluating `f(i, j)` at every position.
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// The n-by-n Hilbert matrix: entry `(i, j)` is `1/(i+j+1)` in the
    /// zero-based indices used here (`1/(i+j-1)` one-based). Symmetric,
    /// positive-definite, and famously ill-conditioned.
    pub fn hilbert(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64)
    }

    /// Seeded standard-Gaussian matrix. Test-fixture generator: Gaussian
    /// matrices are well conditioned with high probability, which the
    /// property suites rely on. Not part of any experiment in itself.
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self::from_vec(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row `i` as a contiguous slice of length `cols`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `A x` for a vector of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec: vector length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T y` for a vector of length `rows`.
    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "matvec_transpose: vector length mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        out
    }

    /// Square root of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Squared Euclidean norm of each row.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), self.row(i))).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm of a vector.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Max-norm of a vector.
#[inline]
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Euclidean norm of `a - b`.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_identity_is_sqrt_n() {
        let a = DenseMatrix::identity(3).unwrap();
        assert!((a.frobenius_norm() - 3.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frobenius_zero_matrix() {
        let a = DenseMatrix::zeros(2, 2).unwrap();
        assert_eq!(a.frobenius_norm(), 0.0);
    }

    #[test]
    fn frobenius_hilbert_2() {
        // Direct summation over the four entries of the 2x2 Hilbert block.
        let a = DenseMatrix::hilbert(2).unwrap();
        let direct: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) * a.get(i, j))
            .sum();
        assert_eq!(a.frobenius_norm(), direct.sqrt());
        assert!((a.frobenius_norm() - 1.2692955176439847).abs() < 1e-12);
    }

    #[test]
    fn hilbert_entries() {
        let h1 = DenseMatrix::hilbert(1).unwrap();
        assert_eq!(h1.row(0), &[1.0]);

        let h2 = DenseMatrix::hilbert(2).unwrap();
        assert_eq!(h2.row(0), &[1.0, 0.5]);
        assert_eq!(h2.row(1), &[0.5, 1.0 / 3.0]);

        let h3 = DenseMatrix::hilbert(3).unwrap();
        assert_eq!(h3.row(1), &[0.5, 1.0 / 3.0, 0.25]);
    }

    #[test]
    fn hilbert_is_symmetric() {
        for n in 1..=12 {
            assert!(DenseMatrix::hilbert(n).unwrap().is_symmetric());
        }
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            DenseMatrix::from_rows(&[]),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFiniteEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            DenseMatrix::from_vec(2, 2, vec![1.0, f64::INFINITY, 0.0, 0.0]),
            Err(Error::NonFiniteEntry { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn rejects_ragged_rows() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            DenseMatrix::from_rows(&rows),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn row_accessor_length() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64).unwrap();
        for i in 0..4 {
            assert_eq!(a.row(i).len(), 3);
        }
        assert_eq!(a.row(2), &[6.0, 7.0, 8.0]);
    }

    #[test]
    fn matvec_against_hand_computation() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, -1.0]), vec![-1.0, -1.0, -1.0]);
        assert_eq!(a.matvec_transpose(&[1.0, 0.0, 1.0]), vec![6.0, 8.0]);
        let t = a.transpose();
        assert_eq!(t.rows(), 2);
        assert_eq!(t.row(0), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn gaussian_is_seed_deterministic() {
        let a = DenseMatrix::gaussian(4, 3, 11).unwrap();
        let b = DenseMatrix::gaussian(4, 3, 11).unwrap();
        let c = DenseMatrix::gaussian(4, 3, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
