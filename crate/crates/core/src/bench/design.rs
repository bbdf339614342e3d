use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::kernel::DesignMatrix;
use crate::rng::seeded;

/// Latin hypercube sample on `[0, 1]^d`: in every column each stratum
/// `[j/n, (j+1)/n)` holds exactly one point, placed uniformly inside it.
pub fn lhs(n: usize, d: usize, seed: u64) -> Result<DesignMatrix<f64>> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("lhs needs n >= 1 and d >= 1"));
    }
    let mut rng = seeded(seed);
    let mut data = vec![0.0; n * d];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (i, &s) in strata.iter().enumerate() {
            data[i * d + j] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    DesignMatrix::from_row_major(n, d, data)
}
