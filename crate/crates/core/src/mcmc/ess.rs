use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Shrink steps after which a slice move is declared broken.
pub const MAX_SHRINKS: usize = 10_000;

/// Result of one elliptical slice move.
#[derive(Debug, Clone)]
pub struct EssMove<A> {
    pub state: Vec<f64>,
    pub loglik: f64,
    /// Whatever the likelihood produced alongside the accepted value.
    pub artifact: A,
    /// Likelihood evaluations consumed.
    pub evaluations: usize,
}

/// One elliptical slice move from `current` for a zero-mean Gaussian prior,
/// given an independent prior draw `nu`. `eval` returns the log-likelihood
/// (and an artifact to keep on acceptance) or `None` when the proposal is
/// numerically infeasible, which counts as falling below the slice.
pub fn elliptical_slice<A, R: rand::Rng + ?Sized>(
    current: &[f64],
    current_loglik: f64,
    nu: &[f64],
    rng: &mut R,
    mut eval: impl FnMut(&[f64]) -> Option<(f64, A)>,
) -> Result<EssMove<A>> {
    if nu.len() != current.len() {
        return Err(Error::invalid("prior draw length differs from state"));
    }
    let height = current_loglik + rng.random::<f64>().ln();
    let mut gamma = rng.random::<f64>() * 2.0 * PI;
    let (mut lo, mut hi) = (gamma - 2.0 * PI, gamma);
    let mut proposal = vec![0.0; current.len()];
    for evaluations in 1..=MAX_SHRINKS {
        let (s, c) = gamma.sin_cos();
        for ((p, w), v) in proposal.iter_mut().zip(current).zip(nu) {
            *p = w * c + v * s;
        }
        if let Some((ll, artifact)) = eval(&proposal) {
            if ll > height {
                assert!(ll > height);
                return Ok(EssMove { state: proposal, loglik: ll, artifact, evaluations });
            }
        }
        if gamma < 0.0 {
            lo = gamma;
        } else {
            hi = gamma;
        }
        gamma = lo + rng.random::<f64>() * (hi - lo);
    }
    Err(Error::Numerical(format!("elliptical slice did not accept within {MAX_SHRINKS} shrinks")))
}
