//! Dense real matrices and the factorizations the rest of the crate uses.
//!
//! Storage is row-major. SVD and the matrix exponential are delegated to
//! `nalgebra`; this module fixes the sign convention and the rank
//! tolerance semantics on top of it.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense row-major real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "matrix entries length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return invalid("ragged rows");
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return invalid("column length mismatch");
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    /// Columns `range` as a new matrix.
    pub fn column_range(&self, start: usize, end: usize) -> Self {
        Self::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵗ · other` without forming the transpose.
    pub fn tr_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return invalid("row count mismatch in transposed product");
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, a) in arow.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return invalid("matrix-vector length mismatch");
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return invalid(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            ));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return invalid("row count mismatch in hstack");
        }
        Ok(Matrix::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    /// Vertical concatenation of blocks with equal column counts.
    pub fn vstack(blocks: &[Matrix]) -> Result<Matrix> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return invalid("column count mismatch in vstack");
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        let data = blocks.iter().flat_map(|b| b.data.iter().copied()).collect();
        Ok(Matrix { rows, cols, data })
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        Matrix::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin singular value decomposition `M = U·diag(s)·Vt`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl Svd {
    /// Number of singular values strictly above `rel_tol · s_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        numerical_rank(&self.s, rel_tol)
    }

    /// The default tolerance `max(rows, cols)·ε`, relative to `s_max`.
    pub fn default_rank(&self) -> usize {
        let rel = self.u.rows().max(self.vt.cols()) as f64 * f64::EPSILON;
        self.rank(rel)
    }
}

/// Count of singular values above `rel_tol · s_max`; zero for an all-zero spectrum.
pub fn numerical_rank(s: &[f64], rel_tol: f64) -> usize {
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Thin SVD with singular values sorted nonincreasingly.
///
/// In every left singular vector the entry of largest absolute value is made
/// nonnegative (lowest index wins ties); the matching row of `vt` is flipped
/// with it.
pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return invalid("svd of a matrix with non-finite entries");
    }
    let k = m.rows.min(m.cols);
    if k == 0 {
        return Ok(Svd {
            u: Matrix::zeros(m.rows, 0),
            s: Vec::new(),
            vt: Matrix::zeros(0, m.cols),
        });
    }
    // nalgebra's bidiagonal SVD loses accuracy on rank-deficient input, so
    // the decomposition itself comes from faer.
    let a = faer::Mat::<f64>::from_fn(m.rows, m.cols, |i, j| m[(i, j)]);
    let dec = a
        .thin_svd()
        .map_err(|e| Error::InvalidArgument(format!("svd did not converge: {e:?}")))?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut u = Matrix::from_fn(m.rows, k, |i, j| fu[(i, j)]);
    let mut vt = Matrix::from_fn(k, m.cols, |i, j| fv[(j, i)]);
    let s: Vec<f64> = (0..k).map(|i| fs[i]).collect();
    for j in 0..k {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..u.rows {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..u.rows {
                u[(i, j)] = -u[(i, j)];
            }
            for c in 0..vt.cols {
                vt[(j, c)] = -vt[(j, c)];
            }
        }
    }
    Ok(Svd { u, s, vt })
}

/// Orthonormal basis (as columns) of the column space of `m` at relative tolerance.
pub fn column_space(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let dec = svd(m)?;
    let r = dec.rank(rel_tol);
    Ok(dec.u.column_range(0, r))
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `u`.
pub fn orthogonal_complement(u: &Matrix) -> Result<Matrix> {
    let n = u.rows;
    let r = u.cols;
    if r >= n {
        return Ok(Matrix::zeros(n, 0));
    }
    let proj = u.matmul(&u.transpose())?;
    let comp = Matrix::identity(n).sub(&proj)?;
    let dec = svd(&comp)?;
    Ok(dec.u.column_range(0, n - r))
}

/// Orthonormal basis of the null space of `m` (right singular vectors with
/// singular value at most `abs_tol`), as columns.
pub fn null_space(m: &Matrix, abs_tol: f64) -> Result<Matrix> {
    let n = m.cols;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    // Pad to at least n rows so the decomposition returns a full right basis.
    let padded = if m.rows < n {
        Matrix::vstack(&[m.clone(), Matrix::zeros(n - m.rows, n)])?
    } else {
        m.clone()
    };
    let dec = svd(&padded)?;
    let keep: Vec<usize> = (0..n).filter(|&i| dec.s[i] <= abs_tol).collect();
    Ok(Matrix::from_fn(n, keep.len(), |i, j| dec.vt[(keep[j], i)]))
}

/// 2-norm condition number of a square matrix; infinite when singular.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return invalid("condition number of a non-square matrix");
    }
    if a.rows == 0 {
        return Ok(1.0);
    }
    let s = svd(a)?.s;
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smin == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(smax / smin)
    }
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return invalid("inverse of a non-square matrix");
    }
    match a.to_nalgebra().try_inverse() {
        Some(inv) => Ok(Matrix::from_nalgebra(&inv)),
        None => invalid("singular matrix"),
    }
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn matrix_exp(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return invalid(format!(
            "matrix exponential of a non-square {}x{} matrix",
            a.rows, a.cols
        ));
    }
    if !a.is_finite() {
        return invalid("matrix exponential of non-finite entries");
    }
    if a.rows == 0 {
        return Ok(a.clone());
    }
    Ok(Matrix::from_nalgebra(&a.to_nalgebra().exp()))
}

/// Orthonormalize the columns of `m` (thin QR, Householder), signs fixed so
/// that the triangular factor has a nonnegative diagonal.
pub fn orthonormalize_columns(m: &Matrix) -> Matrix {
    let qr = m.to_nalgebra().qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = Matrix::from_nalgebra(&q);
    for j in 0..out.cols.min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            for i in 0..out.rows {
                out[(i, j)] = -out[(i, j)];
            }
        }
    }
    out
}
