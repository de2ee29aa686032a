//! Thresholded dense linear algebra shared by every model in the crate.
//!
//! All dimension statements (tangent dimensions, ranks of differentials,
//! kernels of skew forms) reduce to an integer rank. A single rule decides
//! which singular values count as zero, see [`Tolerance`].

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// A vector in euclidean 3-space.
pub type Vec3 = Vector3<f64>;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    /// A matrix carries NaN or infinite entries.
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    InvalidMatrix { row: usize, col: usize },
    /// Right-hand side length does not match the matrix.
    #[error("right-hand side has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Tolerance parameters must be strictly positive.
    #[error("tolerance parameters must be positive (rel {rel_eps}, abs {abs_eps})")]
    InvalidTolerance { rel_eps: f64, abs_eps: f64 },
}

/// Rank threshold.
///
/// A singular value `σ` counts as nonzero iff
/// `σ > max(rows, cols) · σ_max · rel_eps + abs_eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_eps: f64,
    pub abs_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel_eps: 1e-9,
            abs_eps: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rel_eps: f64, abs_eps: f64) -> Result<Self, NumericsError> {
        // NaN fails both comparisons
        if rel_eps > 0.0 && abs_eps > 0.0 {
            Ok(Self { rel_eps, abs_eps })
        } else {
            Err(NumericsError::InvalidTolerance { rel_eps, abs_eps })
        }
    }

    /// Two orders of magnitude stricter in the relative part, used to
    /// re-examine a failed check before reporting it.
    pub fn tightened(&self) -> Self {
        Self { rel_eps: self.rel_eps * 1e-2, abs_eps: self.abs_eps * 1e-2 }
    }

    /// The cutoff below which singular values of an `rows × cols` matrix
    /// with largest singular value `sigma_max` are treated as zero.
    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        rows.max(cols) as f64 * sigma_max * self.rel_eps + self.abs_eps
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), NumericsError> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            if !m[(row, col)].is_finite() {
                return Err(NumericsError::InvalidMatrix { row, col });
            }
        }
    }
    Ok(())
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>, NumericsError> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut values: Vec<f64> = m.singular_values().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Number of singular values above the [`Tolerance`] threshold.
pub fn numerical_rank(m: &DMatrix<f64>, tol: &Tolerance) -> Result<usize, NumericsError> {
    let values = singular_values(m)?;
    let Some(&sigma_max) = values.first() else {
        return Ok(0);
    };
    let cutoff = tol.threshold(m.nrows(), m.ncols(), sigma_max);
    Ok(values.iter().filter(|&&s| s > cutoff).count())
}

/// Full SVD of `m` padded with zero rows so that `V` is square.
///
/// nalgebra only returns the thin factorization; padding does not change
/// the nonzero singular values but exposes the whole right singular basis.
fn full_right_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let cols = m.ncols();
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut sorted = DMatrix::zeros(v_t.nrows(), cols);
    for (dst, &src) in order.iter().enumerate() {
        sorted.row_mut(dst).copy_from(&v_t.row(src));
    }
    (values, sorted)
}

/// Orthonormal basis of the right null space at the thresholded rank.
pub fn kernel_basis(m: &DMatrix<f64>, tol: &Tolerance) -> Result<Vec<DVector<f64>>, NumericsError> {
    check_finite(m)?;
    let cols = m.ncols();
    if cols == 0 {
        return Ok(Vec::new());
    }
    if m.nrows() == 0 {
        return Ok((0..cols).map(|i| DVector::from_fn(cols, |j, _| if i == j { 1.0 } else { 0.0 })).collect());
    }
    let (values, v_t) = full_right_svd(m);
    let sigma_max = values.first().copied().unwrap_or(0.0);
    let cutoff = tol.threshold(m.nrows(), m.ncols(), sigma_max);
    let rank = values.iter().filter(|&&s| s > cutoff).count();
    Ok((rank..cols).map(|i| v_t.row(i).transpose()).collect())
}

/// Minimum-norm least-squares solution of `m x ≈ b` using the thresholded
/// pseudo-inverse.
pub fn least_squares(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: &Tolerance,
) -> Result<DVector<f64>, NumericsError> {
    check_finite(m)?;
    if b.len() != m.nrows() {
        return Err(NumericsError::DimensionMismatch {
            expected: m.nrows(),
            got: b.len(),
        });
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(DVector::zeros(m.ncols()));
    }
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = tol.threshold(m.nrows(), m.ncols(), sigma_max);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut x = DVector::zeros(m.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let coeff = u.column(i).dot(b) / s;
            x += v_t.row(i).transpose() * coeff;
        }
    }
    Ok(x)
}

/// `det[a b c]`, the volume of the parallelepiped spanned by the columns.
pub fn triple_product(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    a.cross(b).dot(c)
}

/// Determinant of a 3×3 matrix with the given columns, by cofactors.
pub fn det3(m: &Matrix3<f64>) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Largest singular value, zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64, NumericsError> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Stacks vectors as the columns of a matrix.
pub fn columns_to_matrix(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.column_mut(j).copy_from(c);
    }
    m
}
