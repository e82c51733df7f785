//! Small-dimension sample statistics and the symmetric eigendecomposition
//! used for whitening and recoloring.
//!
//! Everything accumulates in `f64`. Channel counts are expected to be small
//! (up to a few hundred), so the eigensolver is a plain cyclic Jacobi
//! iteration: it is accurate to working precision, has no platform-dependent
//! code paths and produces the same bits on every run.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Absolute lower bound applied to every eigenvalue.
pub const ABS_EIGEN_FLOOR: f64 = 1e-12;

/// Default relative eigenvalue floor.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Max-abs asymmetry, relative to the largest entry, accepted by [`eig_sym_psd`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidShape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Scales column `j` by `scale[j]`, i.e. `self * diag(scale)`.
    pub fn scale_columns(&self, scale: &[f64]) -> Matrix {
        assert_eq!(scale.len(), self.cols);
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.cols) {
            for (v, s) in row.iter_mut().zip(scale) {
                *v *= s;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_distance(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `N x c` sample matrix, one sample per row.
///
/// Guaranteed to hold at least two samples and only finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    inner: Matrix,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n_samples: usize, n_channels: usize) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::InvalidShape("zero channels".into()));
        }
        if n_samples < 2 {
            return Err(Error::DegenerateSampleCount(n_samples));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self {
            inner: Matrix::from_row_major(n_samples, n_channels, data)?,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        Self::new(m.data, m.rows, m.cols)
    }

    pub fn n_samples(&self) -> usize {
        self.inner.rows
    }

    pub fn n_channels(&self) -> usize {
        self.inner.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.inner.row(i)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.inner.data.chunks(self.inner.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.inner.data
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.inner.data
    }
}

/// Per-sample mean of `features`.
pub fn compute_mean(features: &FeatureMatrix) -> Vec<f64> {
    let c = features.n_channels();
    let mut sum = vec![0.0; c];
    for row in features.rows() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = features.n_samples() as f64;
    sum.into_iter().map(|s| s / n).collect()
}

/// Unbiased sample covariance (divisor `N - 1`).
pub fn compute_covariance(features: &FeatureMatrix) -> Result<Matrix> {
    let mean = compute_mean(features);
    covariance_about(features, &mean)
}

fn covariance_about(features: &FeatureMatrix, mean: &[f64]) -> Result<Matrix> {
    let n = features.n_samples();
    if n < 2 {
        return Err(Error::DegenerateSampleCount(n));
    }
    let c = features.n_channels();
    let mut cov = Matrix::zeros(c, c);
    let mut centered = vec![0.0; c];
    for row in features.rows() {
        for ((d, v), m) in centered.iter_mut().zip(row).zip(mean) {
            *d = v - m;
        }
        for a in 0..c {
            let da = centered[a];
            for b in a..c {
                cov[(a, b)] += da * centered[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..c {
        for b in a..c {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Eigendecomposition of a symmetric positive semi-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Nonincreasing, clamped from below.
    pub eigenvalues: Vec<f64>,
    /// Nonincreasing spectrum as computed, before clamping.
    pub raw_eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: Matrix,
}

/// Lower bound applied to the spectrum of a matrix whose largest eigenvalue
/// is `lambda_max`.
///
/// The bound is `max(epsilon * lambda_max, ABS_EIGEN_FLOOR)`. When the whole
/// spectrum is numerically zero there is no scale to be relative to, and
/// `epsilon` itself is used as the floor.
pub fn eigen_floor(lambda_max: f64, epsilon: f64) -> f64 {
    let scale = if lambda_max > ABS_EIGEN_FLOOR {
        lambda_max
    } else {
        1.0
    };
    (epsilon * scale).max(ABS_EIGEN_FLOOR)
}

/// Symmetric eigendecomposition with a clamped, nonincreasing spectrum.
///
/// Eigenvector columns follow a fixed sign convention: the entry of largest
/// magnitude is positive, with near-ties (relative difference below 1e-9)
/// resolved towards the lowest row index. Equal eigenvalues keep the order
/// in which the solver produced them.
pub fn eig_sym_psd(m: &Matrix, epsilon: f64) -> Result<SymmetricEigen> {
    if m.rows != m.cols {
        return Err(Error::InvalidShape(format!(
            "expected a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidShape(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if let Some(pos) = m.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let n = m.rows;
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asymmetry = asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asymmetry > SYMMETRY_TOLERANCE * m.max_abs() {
        return Err(Error::NotSymmetric { asymmetry });
    }

    let mut a = m.clone();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let (values, vectors) = jacobi(a);

    let mut order: Vec<usize> = (0..n).collect();
    // sort_by is stable, so equal eigenvalues keep solver order
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));

    let raw_eigenvalues: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[(row, col)] = vectors[(row, k)];
        }
    }
    canonicalize_signs(&mut eigenvectors);

    let lambda_max = raw_eigenvalues.first().copied().unwrap_or(0.0);
    let floor = eigen_floor(lambda_max, epsilon);
    let eigenvalues = raw_eigenvalues.iter().map(|&l| l.max(floor)).collect();

    Ok(SymmetricEigen {
        eigenvalues,
        raw_eigenvalues,
        eigenvectors,
    })
}

fn canonicalize_signs(vectors: &mut Matrix) {
    let n = vectors.rows;
    for col in 0..vectors.cols {
        let max = (0..n).fold(0.0_f64, |m, r| m.max(vectors[(r, col)].abs()));
        let Some(pivot) = (0..n).find(|&r| vectors[(r, col)].abs() >= max * (1.0 - 1e-9)) else {
            continue;
        };
        if vectors[(pivot, col)] < 0.0 {
            for r in 0..n {
                vectors[(r, col)] = -vectors[(r, col)];
            }
        }
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigenvalue iteration. Returns unsorted eigenvalues and the
/// accumulated rotation whose columns are the eigenvectors.
fn jacobi(mut a: Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows;
    let mut v = Matrix::identity(n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    (values, v)
}

/// Mean, covariance and clamped eigendecomposition of one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub eigen: SymmetricEigen,
}

impl ChannelStats {
    pub fn n_channels(&self) -> usize {
        self.mean.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigen.eigenvectors
    }

    /// `U * S^(-1/2)`: maps centered samples to identity covariance.
    pub fn whitening_matrix(&self) -> Matrix {
        let scale: Vec<f64> = self.eigen.eigenvalues.iter().map(|l| l.sqrt().recip()).collect();
        self.eigen.eigenvectors.scale_columns(&scale)
    }

    /// `S^(1/2) * U^T`: maps whitened samples to this covariance.
    pub fn coloring_matrix(&self) -> Matrix {
        let scale: Vec<f64> = self.eigen.eigenvalues.iter().map(|l| l.sqrt()).collect();
        self.eigen.eigenvectors.scale_columns(&scale).transpose()
    }
}

pub fn compute_stats(features: &FeatureMatrix, epsilon: f64) -> Result<ChannelStats> {
    let mean = compute_mean(features);
    let covariance = covariance_about(features, &mean)?;
    let eigen = eig_sym_psd(&covariance, epsilon)?;
    Ok(ChannelStats {
        mean,
        covariance,
        eigen,
    })
}
