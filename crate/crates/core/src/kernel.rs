//! Isotropic correlation kernels and covariance assembly.
//!
//! Covariances follow `Sigma(x_i, x_j) = tau2 * (k(|x_i - x_j|^2 / theta) + g 1{i = j})`,
//! so the lengthscale divides the *squared* distance and the nugget is
//! relative to the scale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// Matérn with smoothness 5/2.
    Matern52,
    /// Squared exponential, `exp(-r2)`.
    SqExp,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "matern52" | "matern" => Ok(KernelFamily::Matern52),
            "sqexp" | "exp2" | "gaussian" => Ok(KernelFamily::SqExp),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelFamily::Matern52 => "matern52",
            KernelFamily::SqExp => "sqexp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub lengthscale: T,
    pub scale: T,
    pub nugget: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(family: KernelFamily, lengthscale: T, scale: T, nugget: T) -> Result<Self> {
        let spec = KernelSpec { family, lengthscale, scale, nugget };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit scale, zero nugget: the parameterization of latent layers.
    pub fn correlation(family: KernelFamily, lengthscale: T) -> Result<Self> {
        Self::new(family, lengthscale, T::one(), T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > T::zero()) || !self.lengthscale.is_finite() {
            return Err(Error::invalid(format!("lengthscale must be positive, got {}", self.lengthscale)));
        }
        if !(self.scale > T::zero()) || !self.scale.is_finite() {
            return Err(Error::invalid(format!("scale must be positive, got {}", self.scale)));
        }
        if !(self.nugget >= T::zero()) || !self.nugget.is_finite() {
            return Err(Error::invalid(format!("nugget must be nonnegative, got {}", self.nugget)));
        }
        Ok(())
    }

    /// Covariance between two distinct indices at squared distance `sq_dist`.
    #[inline]
    pub fn cross(&self, sq_dist: T) -> T {
        self.scale * correlation_unchecked(sq_dist, self.family, self.lengthscale)
    }

    /// Marginal variance `tau2 (1 + g)`.
    #[inline]
    pub fn variance(&self) -> T {
        self.scale * (T::one() + self.nugget)
    }

    pub fn with_lengthscale(mut self, lengthscale: T) -> Self {
        self.lengthscale = lengthscale;
        self
    }
}

/// Correlation `k(sq_dist / theta)`.
pub fn correlation<T: Real>(sq_dist: T, family: KernelFamily, lengthscale: T) -> Result<T> {
    if !sq_dist.is_finite() || sq_dist < T::zero() {
        return Err(Error::invalid(format!("squared distance must be finite and nonnegative, got {sq_dist}")));
    }
    if !(lengthscale > T::zero()) || !lengthscale.is_finite() {
        return Err(Error::invalid(format!("lengthscale must be positive, got {lengthscale}")));
    }
    Ok(correlation_unchecked(sq_dist, family, lengthscale))
}

#[inline]
pub(crate) fn correlation_unchecked<T: Real>(sq_dist: T, family: KernelFamily, lengthscale: T) -> T {
    let r2 = sq_dist / lengthscale;
    match family {
        KernelFamily::SqExp => (-r2).exp(),
        KernelFamily::Matern52 => {
            let sqrt5 = T::lit(5f64.sqrt());
            let r = r2.sqrt();
            (T::one() + sqrt5 * r + T::lit(5.0 / 3.0) * r2) * (-sqrt5 * r).exp()
        }
    }
}

#[inline]
pub fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
        let d = *x - *y;
        acc + d * d
    })
}

/// Validated `n x d` input locations (row `i` is `x_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    values: Matrix<T>,
}

impl<T: Real> DesignMatrix<T> {
    pub fn new(values: Matrix<T>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::invalid(format!(
                "design must have n >= 1 and d >= 1, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite design entry at row {}, column {}",
                pos / values.cols(),
                pos % values.cols()
            )));
        }
        Ok(DesignMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged design rows"));
        }
        Self::new(Matrix::from_row_major(rows.len(), d, rows.concat())?)
    }

    pub fn from_row_major(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
        Self::new(Matrix::from_row_major(n, d, data)?)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        self.values.row(i)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.values.column(j)
    }

    pub(crate) fn set_column(&mut self, j: usize, values: &[T]) {
        self.values.set_column(j, values);
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let data = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self::from_row_major(idx.len(), self.d(), data)
    }

    /// Leading `p` columns, cycling through the columns when `p > d`.
    pub fn leading_columns(&self, p: usize) -> Result<Self> {
        let d = self.d();
        let data =
            (0..self.n()).flat_map(|i| (0..p).map(move |k| (i, k % d))).map(|(i, j)| self.values[(i, j)]).collect();
        Self::from_row_major(self.n(), p, data)
    }
}

/// Cross-covariance `tau2 k(|x1_i - x2_j|^2 / theta)`; no nugget.
pub fn cov_matrix<T: Real>(x1: &DesignMatrix<T>, x2: &DesignMatrix<T>, spec: &KernelSpec<T>) -> Result<Matrix<T>> {
    spec.validate()?;
    if x1.d() != x2.d() {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", x1.d(), x2.d())));
    }
    let cols = x2.n();
    let data: Vec<T> = (0..x1.n())
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = x1.row(i);
            (0..cols).map(move |j| spec.cross(sq_dist(xi, x2.row(j))))
        })
        .collect();
    Matrix::from_row_major(x1.n(), cols, data)
}

/// Symmetric covariance of `x` with itself, nugget `tau2 g` on the diagonal.
pub fn cov_matrix_sym<T: Real>(x: &DesignMatrix<T>, spec: &KernelSpec<T>) -> Result<Matrix<T>> {
    spec.validate()?;
    let n = x.n();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = spec.variance();
        for j in 0..i {
            let c = spec.cross(sq_dist(x.row(i), x.row(j)));
            out[(i, j)] = c;
            out[(j, i)] = c;
        }
    }
    Ok(out)
}
