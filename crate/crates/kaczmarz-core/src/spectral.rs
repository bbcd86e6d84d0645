//! Spectral quantities of a dense matrix: the operator norm, the smallest
//! singular value, and (for small matrices) the full singular value
//! decomposition with right singular vectors.
//!
//! Two independent routes are provided on purpose. The iterative
//! estimators (`operator_norm`, `sigma_min_estimate`) scale to the
//! experiment sizes; `svd_small` is the exact reference used to
//! cross-check them and to drive the identity checks that need singular
//! vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, DenseMatrix};

/// Column cap for `svd_small`. The full decomposition exists for
/// verification, not production scale.
pub const SVD_SIZE_CAP: usize = 512;

/// Default relative tolerance for the iterative estimators
/// (Rayleigh-quotient relative change).
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;

/// Norms and singular values of a matrix.
///
/// `singular_values` (descending) and the right singular vectors are
/// present only when the summary came from the exact decomposition;
/// estimated summaries carry the two norms and, when the inverse
/// iteration converged, `sigma_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub frobenius_norm: f64,
    pub operator_norm: f64,
    pub sigma_min: Option<f64>,
    pub singular_values: Option<Vec<f64>>,
    /// Right singular vectors, row `l` holding the unit vector paired
    /// with `singular_values[l]`. Not serialized; callers that need the
    /// basis hold the summary itself.
    #[serde(skip)]
    right_vectors: Option<DenseMatrix>,
}

impl SpectralSummary {
    /// Exact summary via the full decomposition (small matrices only).
    pub fn exact(a: &DenseMatrix) -> Result<Self> {
        svd_small(a)
    }

    /// Estimated summary via power iteration and inverse power
    /// iteration. `sigma_min` is `None` when the Gram matrix is rank
    /// deficient to working precision.
    pub fn estimated(a: &DenseMatrix, tol: f64) -> Result<Self> {
        let operator = operator_norm(a, tol)?;
        let sigma_min = match sigma_min_estimate(a, tol) {
            Ok(s) => Some(s),
            Err(Error::RankDeficient) => None,
            Err(e) => return Err(e),
        };
        Ok(SpectralSummary {
            frobenius_norm: a.frobenius_norm(),
            operator_norm: operator,
            sigma_min,
            singular_values: None,
            right_vectors: None,
        })
    }

    /// Summary from already-known norms, carrying no singular value
    /// list or vectors.
    pub fn from_norms(frobenius_norm: f64, operator_norm: f64, sigma_min: Option<f64>) -> Self {
        SpectralSummary {
            frobenius_norm,
            operator_norm,
            sigma_min,
            singular_values: None,
            right_vectors: None,
        }
    }

    /// Right singular vector paired with `singular_values[l]`.
    pub fn right_vector(&self, l: usize) -> Option<&[f64]> {
        self.right_vectors.as_ref().map(|v| v.row(l))
    }

    /// True when the full singular value list is present.
    pub fn is_exact(&self) -> bool {
        self.singular_values.is_some()
    }
}

/// Largest singular value via power iteration on the Gram matrix
/// `A^T A`, to relative accuracy `tol` on the Rayleigh quotient.
///
/// The start vector is deterministic (normalized all-ones) so results
/// are reproducible; a fixed alternating-sign start covers the case
/// where all-ones is orthogonal to the dominant singular direction.
/// Fails with the last estimate if neither run settles within
/// `100 * n` iterations.
pub fn operator_norm(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if a.frobenius_norm() == 0.0 {
        return Err(Error::InvalidArgument(
            "operator norm estimate requires a nonzero matrix".into(),
        ));
    }
    let n = a.cols();
    let cap = 100 * n.max(1);
    let ones = vec![1.0; n];
    let alternating: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();

    let first = gram_power_iteration(a, ones, tol, cap);
    let second = gram_power_iteration(a, alternating, tol, cap);
    match (first, second) {
        (Ok(x), Ok(y)) => Ok(x.max(y)),
        (Ok(x), Err(stall)) | (Err(stall), Ok(x)) => {
            if x >= stalled_estimate(&stall) {
                Ok(x)
            } else {
                Err(stall)
            }
        }
        (Err(a_stall), Err(b_stall)) => {
            if stalled_estimate(&a_stall) >= stalled_estimate(&b_stall) {
                Err(a_stall)
            } else {
                Err(b_stall)
            }
        }
    }
}

fn stalled_estimate(e: &Error) -> f64 {
    match e {
        Error::PowerIterationStalled { last_estimate, .. } => *last_estimate,
        _ => f64::NEG_INFINITY,
    }
}

/// Power iteration for the largest eigenvalue of `A^T A`; returns the
/// singular value (its square root).
fn gram_power_iteration(a: &DenseMatrix, start: Vec<f64>, tol: f64, cap: usize) -> Result<f64> {
    let mut v = start;
    normalize(&mut v);
    let mut prev = f64::NAN;
    for it in 0..cap {
        let av = a.matvec(&v);
        let bv = a.matvec_transpose(&av);
        // Rayleigh quotient of the Gram matrix at the unit vector v.
        let rq = dot(&v, &bv);
        if rq <= 0.0 {
            // v sits in the kernel; the start carries no usable component.
            return Ok(0.0);
        }
        let estimate = rq.sqrt();
        if it > 0 && (estimate - prev).abs() <= tol * estimate {
            return Ok(estimate);
        }
        prev = estimate;
        let nbv = norm(&bv);
        if nbv == 0.0 {
            return Ok(0.0);
        }
        for (x, y) in v.iter_mut().zip(&bv) {
            *x = y / nbv;
        }
    }
    Err(Error::PowerIterationStalled {
        iterations: cap,
        last_estimate: prev,
    })
}

/// Smallest singular value via inverse power iteration on `A^T A`,
/// requiring full column rank. The Gram matrix is factored once
/// (Cholesky); breakdown reports rank deficiency to working precision.
pub fn sigma_min_estimate(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = a.cols();
    let gram = gram_matrix(a);
    let chol = cholesky(&gram, n)?;
    let cap = 100 * n.max(1);

    let ones = vec![1.0; n];
    let alternating: Vec<f64> = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let first = inverse_iteration(&chol, n, ones, tol, cap);
    let second = inverse_iteration(&chol, n, alternating, tol, cap);
    match (first, second) {
        (Ok(x), Ok(y)) => Ok(x.min(y)),
        (Ok(x), Err(stall)) | (Err(stall), Ok(x)) => {
            let other = stalled_estimate(&stall);
            if other.is_finite() && x <= other {
                Ok(x)
            } else {
                Err(stall)
            }
        }
        (Err(stall), Err(_)) => Err(stall),
    }
}

fn inverse_iteration(chol: &[f64], n: usize, start: Vec<f64>, tol: f64, cap: usize) -> Result<f64> {
    let mut v = start;
    normalize(&mut v);
    let mut prev = f64::NAN;
    for it in 0..cap {
        let y = cholesky_solve(chol, n, &v);
        // v' B^-1 v converges to 1/lambda_min of the Gram matrix.
        let rq_inv = dot(&v, &y);
        if rq_inv <= 0.0 {
            return Err(Error::RankDeficient);
        }
        let estimate = (1.0 / rq_inv).sqrt();
        if it > 0 && (estimate - prev).abs() <= tol * estimate {
            return Ok(estimate);
        }
        prev = estimate;
        let ny = norm(&y);
        if ny == 0.0 {
            return Err(Error::RankDeficient);
        }
        for (x, yi) in v.iter_mut().zip(&y) {
            *x = yi / ny;
        }
    }
    Err(Error::PowerIterationStalled {
        iterations: cap,
        last_estimate: prev,
    })
}

fn gram_matrix(a: &DenseMatrix) -> Vec<f64> {
    let n = a.cols();
    let mut g = vec![0.0; n * n];
    for i in 0..a.rows() {
        let row = a.row(i);
        for p in 0..n {
            let rp = row[p];
            if rp == 0.0 {
                continue;
            }
            for q in p..n {
                g[p * n + q] += rp * row[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            g[p * n + q] = g[q * n + p];
        }
    }
    g
}

/// Dense Cholesky `B = L L^T`, lower triangle stored. A non-positive
/// pivot (beyond roundoff scale) means `B` is numerically singular.
fn cholesky(b: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let max_diag = (0..n).map(|i| b[i * n + i]).fold(0.0_f64, f64::max);
    let breakdown = f64::EPSILON * max_diag * n as f64;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = b[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= breakdown {
                    return Err(Error::RankDeficient);
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    // Forward substitution L y = rhs.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    // Back substitution L^T x = y.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// Full singular value decomposition by one-sided Jacobi rotations,
/// returning descending singular values and orthonormal right singular
/// vectors. One-sided Jacobi keeps high relative accuracy on
/// ill-conditioned inputs, which the Hilbert fixtures need.
///
/// Refuses matrices wider than [`SVD_SIZE_CAP`]; callers at scale use
/// the estimators instead.
pub fn svd_small(a: &DenseMatrix) -> Result<SpectralSummary> {
    let n = a.cols();
    if n > SVD_SIZE_CAP {
        return Err(Error::SvdSizeCap {
            cols: n,
            cap: SVD_SIZE_CAP,
        });
    }
    let m = a.rows();

    // Work on columns: w[j] is the j-th column of the rotated A.
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    // Right-rotation accumulator, columns of V.
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    const MAX_SWEEPS: usize = 64;
    const ORTHO_TOL: f64 = 1e-15;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigmas: Vec<f64> = w.iter().map(|col| norm(col)).collect();
    order.sort_by(|&i, &j| sigmas[j].partial_cmp(&sigmas[i]).unwrap());

    let singular_values: Vec<f64> = order.iter().map(|&j| sigmas[j]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |l, i| v[order[l]][i])?;

    Ok(SpectralSummary {
        frobenius_norm: a.frobenius_norm(),
        operator_norm: singular_values[0],
        sigma_min: Some(singular_values[n - 1]),
        singular_values: Some(singular_values),
        right_vectors: Some(vectors),
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Number of singular values at or above `eps`; needs the full list.
///
/// Always bounded by `frobenius_norm^2 / eps^2`, with equality exactly
/// when all singular values coincide and equal `eps`.
pub fn numerical_rank(summary: &SpectralSummary, eps: f64) -> Result<usize> {
    if eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let values = summary
        .singular_values
        .as_ref()
        .ok_or(Error::MissingSingularValues)?;
    Ok(values.iter().filter(|&&s| s >= eps).count())
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
