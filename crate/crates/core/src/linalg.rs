//! Small dense linear algebra: a row-major matrix plus Cholesky routines.
//!
//! The slice-level functions operate on row-major `k x k` buffers and are
//! the hot path of every conditional-moment computation; the [`Matrix`] and
//! [`Cholesky`] wrappers serve the dense oracle.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!("buffer of length {} cannot hold a {rows}x{cols} matrix", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[T]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * *b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::invalid("matrix-vector length mismatch"));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid("matrix shape mismatch"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| *v * s).collect() }
    }

    /// Copy of the block of rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Assemble a 2x2 block matrix.
    pub fn from_blocks(a11: &Self, a12: &Self, a21: &Self, a22: &Self) -> Result<Self> {
        if a11.rows != a12.rows || a21.rows != a22.rows || a11.cols != a21.cols || a12.cols != a22.cols {
            return Err(Error::invalid("incompatible block shapes"));
        }
        let (r1, c1) = (a11.rows, a11.cols);
        Ok(Self::from_fn(r1 + a21.rows, c1 + a12.cols, |i, j| match (i < r1, j < c1) {
            (true, true) => a11[(i, j)],
            (true, false) => a12[(i, j - c1)],
            (false, true) => a21[(i - r1, j)],
            (false, false) => a22[(i - r1, j - c1)],
        }))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Inner product with four interleaved accumulators.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += *x * *y;
    }
    s
}

/// In-place lower Cholesky of the row-major `k x k` buffer `a`.
///
/// Only the lower triangle is read; on success it holds `L` with `A = L L^T`
/// and the strict upper triangle is left untouched. On failure returns the
/// offending pivot.
pub fn cholesky_in_place<T: Real>(a: &mut [T], k: usize) -> std::result::Result<(), usize> {
    debug_assert_eq!(a.len(), k * k);
    for j in 0..k {
        let row_j = &a[j * k..j * k + j];
        let diag = a[j * k + j] - dot(row_j, row_j);
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(j);
        }
        let diag = diag.sqrt();
        a[j * k + j] = diag;
        for i in (j + 1)..k {
            let (upper, lower) = a.split_at_mut(i * k);
            let row_j = &upper[j * k..j * k + j];
            let row_i = &mut lower[..k];
            row_i[j] = (row_i[j] - dot(&row_i[..j], row_j)) / diag;
        }
    }
    Ok(())
}

/// Solve `L x = b` in place for lower-triangular row-major `L`.
pub fn forward_substitute<T: Real>(l: &[T], k: usize, b: &mut [T]) {
    for i in 0..k {
        let row = &l[i * k..i * k + i];
        let s = b[i] - dot(row, &b[..i]);
        b[i] = s / l[i * k + i];
    }
}

/// Solve `L^T x = b` in place for lower-triangular row-major `L`.
pub fn backward_substitute<T: Real>(l: &[T], k: usize, b: &mut [T]) {
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in (i + 1)..k {
            s -= l[j * k + i] * b[j];
        }
        b[i] = s / l[i * k + i];
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::invalid("Cholesky of a non-square matrix"));
        }
        let k = a.rows();
        let mut l = a.clone();
        cholesky_in_place(&mut l.data, k).map_err(|pivot| Error::NotPositiveDefinite { pivot })?;
        for i in 0..k {
            for j in (i + 1)..k {
                l[(i, j)] = T::zero();
            }
        }
        Ok(Cholesky { l })
    }

    /// Factorize, retrying once with `jitter` added to the diagonal.
    pub fn new_with_jitter(a: &Matrix<T>, jitter: T) -> Result<Self> {
        Self::new(a).or_else(|_| {
            let mut b = a.clone();
            for i in 0..b.rows() {
                b[(i, i)] += jitter;
            }
            Self::new(&b)
        })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.l
    }

    /// `log |A| = 2 sum log L_ii`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<T>() * two
    }

    /// `L^{-1} b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        forward_substitute(self.l.as_slice(), self.dim(), &mut x);
        x
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = self.solve_lower(b);
        backward_substitute(self.l.as_slice(), self.dim(), &mut x);
        x
    }

    /// `A^{-1} B` column by column.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_column(j, &self.solve(&b.column(j)));
        }
        out
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.solve_matrix(&Matrix::identity(self.dim()))
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[T]) -> Vec<T> {
        let k = self.dim();
        (0..k).map(|i| dot(&self.l.row(i)[..=i], &z[..=i])).collect()
    }
}
