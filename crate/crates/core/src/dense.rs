//! Un-approximated Gaussian process computations.
//!
//! This is the reference the Vecchia path is checked against, and the
//! backend of the "full" (dense) models. Costs are cubic in `n`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{cov_matrix, cov_matrix_sym, DesignMatrix, KernelSpec};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Real;
use crate::vecchia::{Ordering, JITTER};

/// Soft size limit for dense factorizations; larger problems only warn.
pub const DENSE_SOFT_LIMIT: usize = 3000;

fn warn_if_large(n: usize) {
    if n > DENSE_SOFT_LIMIT {
        eprintln!("warning: dense GP with n = {n} exceeds {DENSE_SOFT_LIMIT}; cost is cubic in n");
    }
}

fn factorize<T: Real>(cov: &Matrix<T>, spec: &KernelSpec<T>) -> Result<Cholesky<T>> {
    Cholesky::new_with_jitter(cov, T::lit(JITTER) * spec.scale)
}

/// `-1/2 log |Sigma| - 1/2 y^T Sigma^{-1} y`, constant dropped.
pub fn dense_loglik<T: Real>(x: &DesignMatrix<T>, y: &[T], spec: &KernelSpec<T>) -> Result<T> {
    if y.len() != x.n() {
        return Err(Error::invalid("response length differs from design rows"));
    }
    warn_if_large(x.n());
    let chol = factorize(&cov_matrix_sym(x, spec)?, spec)?;
    let v = chol.solve_lower(y);
    let half = T::lit(0.5);
    Ok(-half * chol.log_det() - half * v.iter().map(|a| *a * *a).sum::<T>())
}

/// A dense GP conditioned on training data.
#[derive(Debug, Clone)]
pub struct DenseGp<T> {
    x: DesignMatrix<T>,
    y: Vec<T>,
    spec: KernelSpec<T>,
    chol: Cholesky<T>,
    alpha: Vec<T>,
}

impl<T: Real> DenseGp<T> {
    pub fn new(x: DesignMatrix<T>, y: Vec<T>, spec: KernelSpec<T>) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::invalid("response length differs from design rows"));
        }
        warn_if_large(x.n());
        let chol = factorize(&cov_matrix_sym(&x, &spec)?, &spec)?;
        let alpha = chol.solve(&y);
        Ok(DenseGp { x, y, spec, chol, alpha })
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    pub fn loglik(&self) -> T {
        let half = T::lit(0.5);
        let quad: T = self.y.iter().zip(&self.alpha).map(|(a, b)| *a * *b).sum();
        -half * self.chol.log_det() - half * quad
    }

    /// Predictive mean and covariance at `xtest`; the test covariance
    /// carries the nugget on its diagonal.
    pub fn predict(&self, xtest: &DesignMatrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        let cross = cov_matrix(xtest, &self.x, &self.spec)?;
        let mean = cross.matvec(&self.alpha)?;
        let solved = self.chol.solve_matrix(&cross.transpose());
        let mut cov = cov_matrix_sym(xtest, &self.spec)?.sub(&cross.matmul(&solved)?)?;
        let np = xtest.n();
        for i in 0..np {
            for j in 0..i {
                let s = T::lit(0.5) * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok((mean, cov))
    }

    /// Predictive mean and variance at each row of `xtest` separately.
    pub fn predict_pointwise(&self, xtest: &DesignMatrix<T>) -> Result<(Vec<T>, Vec<T>)> {
        let cross = cov_matrix(xtest, &self.x, &self.spec)?;
        let mean = cross.matvec(&self.alpha)?;
        let var = (0..xtest.n())
            .map(|i| {
                let v = self.chol.solve_lower(cross.row(i));
                let s = self.spec.variance() - v.iter().map(|a| *a * *a).sum::<T>();
                s.max(T::zero())
            })
            .collect();
        Ok((mean, var))
    }
}

/// Joint predictive mean and covariance; see [`DenseGp::predict`].
pub fn dense_predict<T: Real>(model: &DenseGp<T>, xtest: &DesignMatrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    model.predict(xtest)
}

/// The four blocks of the inverse of a 2x2-blocked symmetric positive
/// definite matrix, computed through Schur complements.
#[derive(Debug, Clone)]
pub struct PartitionedInverse<T> {
    pub a11: Matrix<T>,
    pub a12: Matrix<T>,
    pub a21: Matrix<T>,
    pub a22: Matrix<T>,
}

impl<T: Real> PartitionedInverse<T> {
    pub fn assemble(&self) -> Result<Matrix<T>> {
        Matrix::from_blocks(&self.a11, &self.a12, &self.a21, &self.a22)
    }
}

/// Invert `b` blockwise with the leading block of size `split`.
pub fn partitioned_inverse<T: Real>(b: &Matrix<T>, split: usize) -> Result<PartitionedInverse<T>> {
    let n = b.rows();
    if b.cols() != n || split == 0 || split >= n {
        return Err(Error::invalid("need a square matrix and 0 < split < n"));
    }
    let b11 = b.block(0, split, 0, split);
    let b12 = b.block(0, split, split, n);
    let b21 = b.block(split, n, 0, split);
    let b22 = b.block(split, n, split, n);
    let c11 = Cholesky::new(&b11)?;
    let c22 = Cholesky::new(&b22)?;
    // Schur complements
    let s1 = b11.sub(&b12.matmul(&c22.solve_matrix(&b21))?)?;
    let s2 = b22.sub(&b21.matmul(&c11.solve_matrix(&b12))?)?;
    let a11 = Cholesky::new(&s1)?.inverse();
    let a22 = Cholesky::new(&s2)?.inverse();
    let a12 = c11.solve_matrix(&b12).matmul(&a22)?.scale(-T::one());
    let a21 = c22.solve_matrix(&b21).matmul(&a11)?.scale(-T::one());
    Ok(PartitionedInverse { a11, a12, a21, a22 })
}

/// Dense Cholesky factor of the covariance, with rows permuted into an
/// ordering. Exposes the same likelihood and prior-sampling surface as the
/// sparse factor so both drive the same sampler; at full conditioning the
/// two agree to rounding.
#[derive(Debug, Clone)]
pub struct DenseFactor<T> {
    order: Arc<Ordering>,
    chol: Cholesky<T>,
}

impl<T: Real> DenseFactor<T> {
    pub fn build(locations: &DesignMatrix<T>, order: &Arc<Ordering>, spec: &KernelSpec<T>) -> Result<Self> {
        if locations.n() != order.len() {
            return Err(Error::invalid("ordering length differs from locations"));
        }
        warn_if_large(locations.n());
        let permuted = locations.select_rows(order.as_slice())?;
        let chol = factorize(&cov_matrix_sym(&permuted, spec)?, spec)?;
        Ok(DenseFactor { order: Arc::clone(order), chol })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn ordering(&self) -> &Arc<Ordering> {
        &self.order
    }

    fn whitened(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.n() {
            return Err(Error::invalid("vector length differs from factor size"));
        }
        Ok(self.chol.solve_lower(&self.order.permute(y)))
    }

    pub fn quad_form(&self, y: &[T]) -> Result<T> {
        Ok(self.whitened(y)?.iter().map(|v| *v * *v).sum())
    }

    /// `-1/2 log |Sigma|`.
    pub fn log_diag_sum(&self) -> T {
        -T::lit(0.5) * self.chol.log_det()
    }

    pub fn loglik(&self, y: &[T]) -> Result<T> {
        Ok(self.log_diag_sum() - T::lit(0.5) * self.quad_form(y)?)
    }

    pub fn profiled_loglik(&self, y: &[T]) -> Result<(T, T)> {
        let q = self.quad_form(y)?;
        if !(q > T::zero()) || !q.is_finite() {
            return Err(Error::Numerical(format!("quadratic form {q} is not positive")));
        }
        let n = T::from_usize(self.n()).expect("n fits the scalar");
        Ok((self.log_diag_sum() - T::lit(0.5) * n * q.ln(), q / n))
    }

    /// `L z` in original index order, `z` indexed by ordered position.
    pub fn sample(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.n() {
            return Err(Error::invalid("vector length differs from factor size"));
        }
        let ordered = self.chol.mul_lower(z);
        let mut out = vec![T::zero(); self.n()];
        for (pos, v) in ordered.into_iter().enumerate() {
            out[self.order.index(pos)] = v;
        }
        Ok(out)
    }
}
