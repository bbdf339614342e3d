use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// A permutation: `position -> original index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ordering(Vec<usize>);

impl Ordering {
    pub fn identity(n: usize) -> Self {
        Ordering((0..n).collect())
    }

    pub fn from_vec(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &i in &perm {
            if i >= perm.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("ordering is not a permutation"));
            }
        }
        Ok(Ordering(perm))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Original index at `position`.
    #[inline]
    pub fn index(&self, position: usize) -> usize {
        self.0[position]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `values` rearranged into ordered positions.
    pub fn permute<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.0.iter().map(|&i| values[i]).collect()
    }

    /// Inverse of [`Ordering::permute`].
    pub fn unpermute<T: Copy + Default>(&self, ordered: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); ordered.len()];
        for (pos, &i) in self.0.iter().enumerate() {
            out[i] = ordered[pos];
        }
        out
    }
}

/// Uniformly random permutation of `0..n`, reproducible from `seed`.
pub fn random_ordering(n: usize, seed: u64) -> Result<Ordering> {
    if n == 0 {
        return Err(Error::invalid("cannot order an empty set"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(seed));
    Ok(Ordering(perm))
}
