use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelFamily;

/// Which factorization the sampler runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Sparse inverse-Cholesky factor with nearest-neighbour conditioning.
    Vecchia,
    /// Exact dense Cholesky factor, cubic in `n`.
    Dense,
}

/// Gamma prior with shape/rate parametrization, truncated below at `lower`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
    pub lower: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        GammaPrior { shape: 1.5, rate: 3.9 / 1.5, lower: 1e-6 }
    }
}

impl GammaPrior {
    /// Log density up to a constant; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if !(x >= self.lower) || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        (self.shape - 1.0) * x.ln() - self.rate * x
    }

    /// Flat prior on `(lower, inf)`; mostly useful in tests.
    pub fn flat() -> Self {
        GammaPrior { shape: 1.0, rate: 0.0, lower: 1e-6 }
    }
}

/// How the outer-layer nugget is handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum NuggetMode {
    Fixed {
        value: f64,
    },
    /// Exponential prior with the given mean, truncated below at `lower`.
    Sampled {
        initial: f64,
        prior_mean: f64,
        lower: f64,
    },
}

impl NuggetMode {
    pub fn sampled() -> Self {
        NuggetMode::Sampled { initial: 0.01, prior_mean: 0.01, lower: 1e-10 }
    }

    pub fn initial(&self) -> f64 {
        match *self {
            NuggetMode::Fixed { value } => value,
            NuggetMode::Sampled { initial, .. } => initial,
        }
    }

    pub(crate) fn log_prior(&self, g: f64) -> f64 {
        match *self {
            NuggetMode::Fixed { .. } => 0.0,
            NuggetMode::Sampled { prior_mean, lower, .. } => {
                if g >= lower && g.is_finite() {
                    -g / prior_mean
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Sampler settings. `depth` counts Gaussian layers: 1 is an ordinary GP,
/// 2 a two-layer DGP with one latent layer of `width` nodes, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub n_mcmc: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub depth: usize,
    /// Latent width `p`; `None` means the input dimension.
    pub width: Option<usize>,
    /// Conditioning size; capped at `n - 1`.
    pub m: usize,
    pub backend: Backend,
    pub kernel: KernelFamily,
    pub theta_prior: GammaPrior,
    /// Multiplicative proposal window `(l, u)`.
    pub proposal: (f64, f64),
    pub theta_init: f64,
    pub nugget: NuggetMode,
    /// Rescale inputs to the unit cube and standardize the response.
    pub standardize: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_mcmc: 3000,
            burn_in: 1000,
            thin: 2,
            seed: 1,
            depth: 2,
            width: None,
            m: 25,
            backend: Backend::Vecchia,
            kernel: KernelFamily::Matern52,
            theta_prior: GammaPrior::default(),
            proposal: (0.75, 1.3),
            theta_init: 0.1,
            nugget: NuggetMode::Fixed { value: 1e-8 },
            standardize: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.burn_in >= self.n_mcmc {
            return bad(format!("burn_in ({}) must be below n_mcmc ({})", self.burn_in, self.n_mcmc));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        let (l, u) = self.proposal;
        if !(l > 0.0 && l < 1.0 && u > 1.0 && u.is_finite()) {
            return bad(format!("proposal window ({l}, {u}) must satisfy 0 < l < 1 < u"));
        }
        if self.depth == 0 {
            return bad("depth must be at least 1".into());
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        let p = &self.theta_prior;
        if !(p.shape > 0.0 && p.rate >= 0.0 && p.lower > 0.0) {
            return bad("lengthscale prior needs shape > 0, rate >= 0, lower > 0".into());
        }
        if !(self.theta_init > 0.0 && self.theta_init.is_finite()) {
            return bad("theta_init must be positive".into());
        }
        match self.nugget {
            NuggetMode::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                return bad(format!("fixed nugget {value} must be nonnegative"));
            }
            NuggetMode::Sampled { initial, prior_mean, lower }
                if !(prior_mean > 0.0 && lower > 0.0 && initial >= lower && initial.is_finite()) =>
            {
                return bad("sampled nugget needs prior_mean > 0 and initial >= lower > 0".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Number of retained samples a fresh chain produces.
    pub fn retained(&self) -> usize {
        (self.n_mcmc - self.burn_in) / self.thin
    }

    /// Effective latent width for inputs of dimension `d` (0 for a GP).
    pub fn latent_width(&self, d: usize) -> usize {
        if self.depth < 2 {
            0
        } else {
            self.width.unwrap_or(d)
        }
    }

    /// Number of latent layers actually present.
    pub fn latent_layers(&self, d: usize) -> usize {
        if self.latent_width(d) == 0 {
            0
        } else {
            self.depth - 1
        }
    }

    /// Conditioning size used for `n` training points.
    pub fn effective_m(&self, n: usize) -> usize {
        self.m.min(n.saturating_sub(1)).max(1)
    }
}
