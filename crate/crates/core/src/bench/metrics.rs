use std::f64::consts::PI;

use crate::error::{Error, Result};

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!("need equal nonzero lengths, got {} and {}", a.len(), b.len())));
    }
    Ok(())
}

pub fn rmse(mean: &[f64], truth: &[f64]) -> Result<f64> {
    same_len(mean, truth)?;
    let ss: f64 = mean.iter().zip(truth).map(|(m, y)| (y - m) * (y - m)).sum();
    Ok((ss / mean.len() as f64).sqrt())
}

/// Root mean squared percentage error, in percent.
pub fn rmspe(mean: &[f64], truth: &[f64]) -> Result<f64> {
    same_len(mean, truth)?;
    let mut ss = 0.0;
    for (i, (m, y)) in mean.iter().zip(truth).enumerate() {
        if *y == 0.0 {
            return Err(Error::invalid(format!("rmspe undefined: true value {i} is zero")));
        }
        let r = 100.0 * (y - m) / y;
        ss += r * r;
    }
    Ok((ss / mean.len() as f64).sqrt())
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// CRPS of one Gaussian forecast, nonnegative and lower-is-better.
pub fn crps_gaussian(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    sd * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - 1.0 / PI.sqrt())
}

/// Mean Gaussian CRPS over points.
pub fn crps(truth: &[f64], mean: &[f64], sd: &[f64]) -> Result<f64> {
    same_len(truth, mean)?;
    same_len(truth, sd)?;
    let mut total = 0.0;
    for i in 0..truth.len() {
        if !(sd[i] > 0.0) || !sd[i].is_finite() {
            return Err(Error::invalid(format!("crps needs sd > 0, got {} at {i}", sd[i])));
        }
        total += crps_gaussian(truth[i], mean[i], sd[i]);
    }
    Ok(total / truth.len() as f64)
}
