use std::sync::Arc;

use rayon::prelude::*;

use super::neighbors::ConditioningPlan;
use crate::error::{Error, Result};
use crate::kernel::{sq_dist, DesignMatrix, KernelSpec};
use crate::linalg::{backward_substitute, cholesky_in_place, dot, forward_substitute, Matrix};
use crate::scalar::Real;

/// Relative diagonal jitter (times the scale) used for the single retry
/// when a conditioning block fails to factorize.
pub const JITTER: f64 = 1e-10;

/// Regression weights `B_i` and conditional variance `sigma_i^2` of one
/// point given its conditioning set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments<T> {
    pub weights: Vec<T>,
    pub variance: T,
}

impl<T: Real> ConditionalMoments<T> {
    /// Conditional mean `B_i y_c` for neighbour values `y_c`.
    pub fn mean(&self, neighbor_values: &[T]) -> T {
        dot(&self.weights, neighbor_values)
    }
}

/// Conditional moments of the response at `target` given the responses at
/// `neighbors`, under `spec`. `index` only labels errors.
pub fn conditional_moments<T: Real>(
    target: &[T],
    neighbors: &[&[T]],
    spec: &KernelSpec<T>,
    index: usize,
) -> Result<ConditionalMoments<T>> {
    let k = neighbors.len();
    let variance = spec.variance();
    if k == 0 {
        return Ok(ConditionalMoments { weights: Vec::new(), variance });
    }
    let assemble = || {
        let mut block = vec![T::zero(); k * k];
        for (a, na) in neighbors.iter().enumerate() {
            block[a * k + a] = variance;
            for (b, nb) in neighbors[..a].iter().enumerate() {
                block[a * k + b] = spec.cross(sq_dist(na, nb));
            }
        }
        block
    };
    let cross: Vec<T> = neighbors.iter().map(|nb| spec.cross(sq_dist(target, nb))).collect();
    match moments_from_block(assemble(), &cross, variance, T::zero()) {
        Ok(m) => Ok(m),
        Err(first) => {
            let jitter = T::lit(JITTER) * spec.scale;
            moments_from_block(assemble(), &cross, variance, jitter)
                .map_err(|second| Error::Factorization { index, detail: format!("{first}; after jitter: {second}") })
        }
    }
}

fn moments_from_block<T: Real>(
    mut block: Vec<T>,
    cross: &[T],
    variance: T,
    jitter: T,
) -> std::result::Result<ConditionalMoments<T>, String> {
    let k = cross.len();
    if jitter > T::zero() {
        for a in 0..k {
            block[a * k + a] += jitter;
        }
    }
    cholesky_in_place(&mut block, k).map_err(|p| format!("conditioning block not positive definite at pivot {p}"))?;
    let mut v = cross.to_vec();
    forward_substitute(&block, k, &mut v);
    let sigma2 = variance + jitter - dot(&v, &v);
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(format!("non-positive conditional variance {sigma2}"));
    }
    backward_substitute(&block, k, &mut v);
    Ok(ConditionalMoments { weights: v, variance: sigma2 })
}

/// Sparse upper-triangular `U` in ordered coordinates with
/// `(U U^T)^{-1}` approximating the covariance. Column `i` holds the
/// diagonal `1/sigma_i` and `-B_i/sigma_i` on the rows of `c(i)`.
#[derive(Debug, Clone)]
pub struct SparseUpperFactor<T> {
    plan: Arc<ConditioningPlan>,
    diag: Vec<T>,
    values: Vec<T>,
}

/// Populate `U` column by column (in parallel) from `locations`, given in
/// original index order.
pub fn build_u<T: Real>(
    locations: &DesignMatrix<T>,
    plan: &Arc<ConditioningPlan>,
    spec: &KernelSpec<T>,
) -> Result<SparseUpperFactor<T>> {
    spec.validate()?;
    if locations.n() != plan.n() {
        return Err(Error::invalid(format!("{} locations for a plan over {} points", locations.n(), plan.n())));
    }
    let order = plan.ordering();
    let columns: Vec<(T, Vec<T>)> = (0..plan.n())
        .into_par_iter()
        .map(|i| {
            let target = locations.row(order.index(i));
            let nbrs: Vec<&[T]> = plan.set(i).iter().map(|&j| locations.row(order.index(j))).collect();
            let cm = conditional_moments(target, &nbrs, spec, i)?;
            let inv_sd = T::one() / cm.variance.sqrt();
            Ok((inv_sd, cm.weights.into_iter().map(|b| -b * inv_sd).collect()))
        })
        .collect::<Result<_>>()?;
    let mut diag = Vec::with_capacity(plan.n());
    let mut values = Vec::with_capacity(plan.nnz() - plan.n());
    for (d, col) in columns {
        diag.push(d);
        values.extend(col);
    }
    Ok(SparseUpperFactor { plan: Arc::clone(plan), diag, values })
}

impl<T: Real> SparseUpperFactor<T> {
    #[inline]
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn plan(&self) -> &Arc<ConditioningPlan> {
        &self.plan
    }

    /// Diagonal entries `U^{ii} = 1/sigma_i`, by ordered position.
    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    /// Off-diagonal `(row position, value)` pairs of column `i`.
    pub fn column(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let ptr = self.plan.col_ptr();
        self.plan.set(i).iter().copied().zip(self.values[ptr[i]..ptr[i + 1]].iter().copied())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::invalid(format!("vector of length {len} for a factor of size {}", self.n())));
        }
        Ok(())
    }

    /// `U^T y` by ordered position, for `y` in original index order.
    pub fn transpose_mul(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_len(y.len())?;
        let order = self.plan.ordering();
        Ok((0..self.n())
            .map(|i| self.column(i).fold(self.diag[i] * y[order.index(i)], |acc, (j, u)| acc + u * y[order.index(j)]))
            .collect())
    }

    /// `y^T U U^T y`.
    pub fn quad_form(&self, y: &[T]) -> Result<T> {
        Ok(self.transpose_mul(y)?.into_iter().map(|v| v * v).sum())
    }

    /// `sum_i log U^{ii} = -1/2 log |(U U^T)^{-1}|`.
    pub fn log_diag_sum(&self) -> T {
        self.diag.iter().map(|d| d.ln()).sum()
    }

    /// `sum_i log U^{ii} - 1/2 y^T U U^T y`; the `-(n/2) log 2 pi` constant
    /// is omitted.
    pub fn loglik(&self, y: &[T]) -> Result<T> {
        Ok(self.log_diag_sum() - T::lit(0.5) * self.quad_form(y)?)
    }

    /// Scale-profiled objective for a factor built at unit scale:
    /// returns `(sum_i log U^{ii} - (n/2) log(y^T U U^T y), y^T U U^T y / n)`.
    pub fn profiled_loglik(&self, y: &[T]) -> Result<(T, T)> {
        let q = self.quad_form(y)?;
        if !(q > T::zero()) || !q.is_finite() {
            return Err(Error::Numerical(format!("quadratic form {q} is not positive")));
        }
        let n = T::from_usize(self.n()).expect("n fits the scalar");
        Ok((self.log_diag_sum() - T::lit(0.5) * n * q.ln(), q / n))
    }

    /// Draw from `N(0, (U U^T)^{-1})` by forward solving `U^T y = z`, with
    /// `z` indexed by ordered position. Result in original index order.
    pub fn sample(&self, z: &[T]) -> Result<Vec<T>> {
        self.check_len(z.len())?;
        let order = self.plan.ordering();
        let mut ordered = vec![T::zero(); self.n()];
        for i in 0..self.n() {
            let d = self.diag[i];
            if d == T::zero() || !d.is_finite() {
                return Err(Error::Factorization { index: i, detail: format!("diagonal entry {d}") });
            }
            let s = self.column(i).fold(z[i], |acc, (j, u)| acc - u * ordered[j]);
            ordered[i] = s / d;
        }
        let mut out = vec![T::zero(); self.n()];
        for (pos, v) in ordered.into_iter().enumerate() {
            out[order.index(pos)] = v;
        }
        Ok(out)
    }

    /// Dense copy of `U` in ordered coordinates.
    pub fn to_dense(&self) -> Matrix<T> {
        let mut u = Matrix::zeros(self.n(), self.n());
        for i in 0..self.n() {
            u[(i, i)] = self.diag[i];
            for (j, v) in self.column(i) {
                u[(j, i)] = v;
            }
        }
        u
    }

    /// Dense precision `U U^T` in original index order.
    pub fn precision(&self) -> Matrix<T> {
        let u = self.to_dense();
        let q = u.matmul(&u.transpose()).expect("square");
        let order = self.plan.ordering();
        let mut out = Matrix::zeros(self.n(), self.n());
        for a in 0..self.n() {
            for b in 0..self.n() {
                out[(order.index(a), order.index(b))] = q[(a, b)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{cov_matrix_sym, KernelFamily};
    use crate::linalg::Cholesky;
    use crate::vecchia::{nn_conditioning, random_ordering};

    fn design(n: usize, d: usize, seed: u64) -> DesignMatrix<f64> {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        DesignMatrix::from_row_major(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn plan(x: &DesignMatrix<f64>, m: usize, seed: u64) -> Arc<ConditioningPlan> {
        Arc::new(nn_conditioning(x, &random_ordering(x.n(), seed).unwrap(), m).unwrap())
    }

    #[test]
    fn single_point_factor() {
        let x = DesignMatrix::from_rows(&[vec![0.2]]).unwrap();
        let spec = KernelSpec::new(KernelFamily::Matern52, 0.5, 2.0, 0.1).unwrap();
        let u = build_u(&x, &plan(&x, 1, 0), &spec).unwrap();
        assert!((u.diag()[0] - 1.0 / (2.2f64).sqrt()).abs() < 1e-15);
        let s = u.sample(&[1.5]).unwrap();
        assert!((s[0] - 1.5 * 2.2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn full_conditioning_recovers_covariance() {
        let x = design(50, 2, 1);
        let spec = KernelSpec::new(KernelFamily::Matern52, 0.3, 1.3, 1e-6).unwrap();
        let u = build_u(&x, &plan(&x, 49, 2), &spec).unwrap();
        let cov = Cholesky::new(&u.precision()).unwrap().inverse();
        let dense = cov_matrix_sym(&x, &spec).unwrap();
        let rel = cov.sub(&dense).unwrap().frobenius_norm() / dense.frobenius_norm();
        assert!(rel < 1e-8, "relative Frobenius error {rel}");
    }

    #[test]
    fn zero_response_gives_log_diag() {
        let x = design(20, 3, 4);
        let spec = KernelSpec::new(KernelFamily::SqExp, 0.4, 1.0, 1e-4).unwrap();
        let u = build_u(&x, &plan(&x, 5, 3), &spec).unwrap();
        assert_eq!(u.loglik(&[0.0; 20]).unwrap(), u.log_diag_sum());
        assert!(u.profiled_loglik(&[0.0; 20]).is_err());
        assert!(u.loglik(&[0.0; 3]).is_err());
    }

    #[test]
    fn sparsity_pattern_matches_plan() {
        let x = design(60, 2, 7);
        let p = plan(&x, 4, 8);
        let spec = KernelSpec::new(KernelFamily::Matern52, 0.2, 1.0, 1e-8).unwrap();
        let u = build_u(&x, &p, &spec).unwrap();
        let dense = u.to_dense();
        for i in 0..60 {
            let nz: Vec<usize> = (0..i).filter(|&j| dense[(j, i)] != 0.0).collect();
            assert_eq!(nz, p.set(i));
            assert!(nz.len() <= 4);
            assert!(u.diag()[i] > 0.0);
            for j in (i + 1)..60 {
                assert_eq!(dense[(j, i)], 0.0);
            }
        }
    }

    #[test]
    fn duplicate_points_recover_with_jitter() {
        let x = DesignMatrix::from_rows(&[vec![0.1], vec![0.1], vec![0.7]]).unwrap();
        let spec = KernelSpec::correlation(KernelFamily::Matern52, 0.5).unwrap();
        let u = build_u(&x, &Arc::new(nn_conditioning(&x, &crate::Ordering::identity(3), 2).unwrap()), &spec);
        let u = u.unwrap();
        assert!(u.diag()[1] > 1e4);
    }

    #[test]
    fn zero_noise_sample_is_zero() {
        let x = design(10, 1, 9);
        let spec = KernelSpec::new(KernelFamily::SqExp, 0.1, 1.0, 0.0).unwrap();
        let u = build_u(&x, &plan(&x, 3, 1), &spec).unwrap();
        assert!(u.sample(&[0.0; 10]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_precision_factor() {
        let x = DesignMatrix::<f32>::from_rows(&[vec![0.0], vec![0.3], vec![0.9]]).unwrap();
        let spec = KernelSpec::new(KernelFamily::Matern52, 0.5f32, 1.0, 1e-4).unwrap();
        let p = Arc::new(nn_conditioning(&x, &crate::Ordering::identity(3), 2).unwrap());
        let u = build_u(&x, &p, &spec).unwrap();
        let ll = u.loglik(&[0.1, -0.2, 0.3]).unwrap();
        assert!(ll.is_finite());
    }
}
