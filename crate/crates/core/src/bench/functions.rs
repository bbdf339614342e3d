use crate::error::{Error, Result};

const EDGE: f64 = 1e-12;

/// Schaffer function no. 2 on `[-2, 2]^2`.
pub fn schaffer2(x: &[f64]) -> Result<f64> {
    if x.len() != 2 || x.iter().any(|v| !(v.abs() <= 2.0 + EDGE)) {
        return Err(Error::invalid(format!("schaffer2 needs a point in [-2, 2]^2, got {x:?}")));
    }
    let (a, b) = (x[0] * x[0], x[1] * x[1]);
    let c = (a - b).abs().sin().cos();
    let den = 1.0 + 0.001 * (a + b);
    Ok(0.5 + (c * c - 0.5) / (den * den))
}

/// G-function on `[0, 1]^d` with `a_i = (i - 2) / 2`, `i` counted from 1.
pub fn gfunction(x: &[f64]) -> Result<f64> {
    if x.is_empty() || x.iter().any(|v| !(*v >= -EDGE && *v <= 1.0 + EDGE)) {
        return Err(Error::invalid(format!("gfunction needs a point in [0, 1]^d, got {x:?}")));
    }
    Ok(x.iter()
        .enumerate()
        .map(|(i, v)| {
            let a = (i as f64 - 1.0) / 2.0;
            ((4.0 * v - 2.0).abs() + a) / (1.0 + a)
        })
        .product())
}
