use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ordering::Ordering;
use crate::error::{Error, Result};
use crate::kernel::{sq_dist, DesignMatrix};
use crate::scalar::Real;

/// An ordering plus, for every ordered position `i`, the conditioning set
/// `c(i)` of earlier positions. Stored column-compressed: the positions of
/// column `i` are `rows[col_ptr[i]..col_ptr[i + 1]]`, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningPlan {
    order: Ordering,
    m: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
}

impl ConditioningPlan {
    /// Assemble from explicit per-position sets, checking every invariant.
    pub fn from_sets(order: Ordering, m: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        if sets.len() != order.len() {
            return Err(Error::invalid("one conditioning set per position required"));
        }
        let mut col_ptr = Vec::with_capacity(sets.len() + 1);
        let mut rows = Vec::new();
        col_ptr.push(0);
        for (i, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            if set.len() != m.min(i) {
                return Err(Error::invalid(format!(
                    "position {i} conditions on {} points, expected {}",
                    set.len(),
                    m.min(i)
                )));
            }
            if set.windows(2).any(|w| w[0] == w[1]) || set.last().is_some_and(|&j| j >= i) {
                return Err(Error::invalid(format!("position {i} has an invalid conditioning set")));
            }
            rows.extend(set);
            col_ptr.push(rows.len());
        }
        Ok(ConditioningPlan { order, m, col_ptr, rows })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ordering(&self) -> &Ordering {
        &self.order
    }

    /// Conditioning set of ordered position `i`, as ascending positions.
    #[inline]
    pub fn set(&self, i: usize) -> &[usize] {
        &self.rows[self.col_ptr[i]..self.col_ptr[i + 1]]
    }

    pub fn sets(&self) -> impl Iterator<Item = &[usize]> {
        (0..self.n()).map(move |i| self.set(i))
    }

    pub fn nnz(&self) -> usize {
        self.rows.len() + self.n()
    }

    pub(crate) fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    /// Re-check the invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let sets = self.sets().map(<[usize]>::to_vec).collect();
        Self::from_sets(self.order.clone(), self.m, sets).map(|_| ())
    }
}

/// Keeps the `cap` smallest `(distance, index)` pairs seen so far, sorted.
struct Nearest<T> {
    cap: usize,
    items: Vec<(T, usize)>,
}

impl<T: Real> Nearest<T> {
    fn new(cap: usize) -> Self {
        Nearest { cap, items: Vec::with_capacity(cap + 1) }
    }

    #[inline]
    fn offer(&mut self, dist: T, idx: usize) {
        if self.cap == 0 {
            return;
        }
        if self.items.len() == self.cap {
            let (wd, wi) = self.items[self.cap - 1];
            if dist > wd || (dist == wd && idx > wi) {
                return;
            }
        }
        let at = self.items.partition_point(|&(d, i)| d < dist || (d == dist && i < idx));
        self.items.insert(at, (dist, idx));
        self.items.truncate(self.cap);
    }

    fn indices(self) -> Vec<usize> {
        self.items.into_iter().map(|(_, i)| i).collect()
    }
}

/// Nearest-neighbour conditioning: each position conditions on the
/// `min(m, i)` closest earlier positions, ties going to the lower position.
pub fn nn_conditioning<T: Real>(locations: &DesignMatrix<T>, order: &Ordering, m: usize) -> Result<ConditioningPlan> {
    if m == 0 {
        return Err(Error::invalid("conditioning size m must be at least 1"));
    }
    if locations.n() != order.len() {
        return Err(Error::invalid(format!("{} locations but ordering of length {}", locations.n(), order.len())));
    }
    let sets: Vec<Vec<usize>> = (0..order.len())
        .into_par_iter()
        .map(|i| {
            let xi = locations.row(order.index(i));
            let mut best = Nearest::new(m.min(i));
            for j in 0..i {
                best.offer(sq_dist(xi, locations.row(order.index(j))), j);
            }
            best.indices()
        })
        .collect();
    ConditioningPlan::from_sets(order.clone(), m, sets)
}

/// Rows of `reference` nearest to `query` (at most `m`), closest first, ties
/// to the lower row index.
pub fn nearest_neighbors<T: Real>(query: &[T], reference: &DesignMatrix<T>, m: usize) -> Vec<usize> {
    let mut best = Nearest::new(m.min(reference.n()));
    for j in 0..reference.n() {
        best.offer(sq_dist(query, reference.row(j)), j);
    }
    best.indices()
}

/// Like [`nearest_neighbors`] over the concatenation of `first` and the
/// leading `second_len` rows of `second`; rows of `second` are numbered from
/// `first.n()`.
pub(crate) fn nearest_neighbors_stacked<T: Real>(
    query: &[T],
    first: &DesignMatrix<T>,
    second: &[&[T]],
    m: usize,
) -> Vec<usize> {
    let n1 = first.n();
    let mut best = Nearest::new(m.min(n1 + second.len()));
    for j in 0..n1 {
        best.offer(sq_dist(query, first.row(j)), j);
    }
    for (j, row) in second.iter().enumerate() {
        best.offer(sq_dist(query, row), n1 + j);
    }
    best.indices()
}
