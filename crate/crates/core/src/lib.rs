//! Vecchia-approximated deep Gaussian process surrogates.
//!
//! The numerical building blocks ([`kernel`], [`linalg`], [`vecchia`] and
//! [`dense`]) are generic over a [`Real`] scalar so they run in `f32` or
//! `f64`. The samplers, prediction and benchmark harness work in `f64`; the
//! aliases below name the concrete types they use.

// NaN-rejecting checks are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dense;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod mcmc;
pub mod predict;
pub mod rng;
pub mod scalar;
pub mod vecchia;

pub use error::{Error, Result};
pub use kernel::KernelFamily;
pub use scalar::Real;
pub use vecchia::{ConditioningPlan, Ordering};

/// Kernel hyperparameters in double precision.
pub type KernelSpec = kernel::KernelSpec<f64>;
/// An `n x d` input design in double precision.
pub type DesignMatrix = kernel::DesignMatrix<f64>;
/// Row-major dense matrix in double precision.
pub type Matrix = linalg::Matrix<f64>;
/// Sparse inverse-Cholesky factor in double precision.
pub type SparseUpperFactor = vecchia::SparseUpperFactor<f64>;
/// Dense ordered Cholesky factor in double precision.
pub type DenseFactor = dense::DenseFactor<f64>;
/// Dense Gaussian process in double precision.
pub type DenseGp = dense::DenseGp<f64>;
/// Conditional regression weights and variance in double precision.
pub type ConditionalMoments = vecchia::ConditionalMoments<f64>;

pub use mcmc::{continue_fit, fit, Backend, DgpTrace, SamplerConfig};
pub use predict::{predict_independent, predict_joint, PredictOptions, PredictionResult};
