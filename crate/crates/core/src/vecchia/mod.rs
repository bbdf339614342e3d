//! Vecchia machinery: orderings, nearest-neighbour conditioning sets, the
//! sparse upper inverse-Cholesky factor `U` (with `Sigma^{-1} ~= U U^T`),
//! and the likelihood and prior-sampling routines built on it.

mod factor;
mod neighbors;
mod ordering;

pub use factor::{build_u, conditional_moments, ConditionalMoments, SparseUpperFactor, JITTER};
pub(crate) use neighbors::nearest_neighbors_stacked;
pub use neighbors::{nearest_neighbors, nn_conditioning, ConditioningPlan};
pub use ordering::{random_ordering, Ordering};
