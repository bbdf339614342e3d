use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::SamplerConfig;
use super::state::{Acceptance, LayerPlan, Model, State};
use crate::error::{Error, Result};
use crate::kernel::DesignMatrix;

pub const TRACE_FORMAT: &str = "vdgp-trace";
pub const TRACE_VERSION: u32 = 1;

/// Affine maps between user units and the units the sampler works in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    pub x_offset: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl Standardization {
    pub fn identity(d: usize) -> Self {
        Standardization { x_offset: vec![0.0; d], x_scale: vec![1.0; d], y_mean: 0.0, y_sd: 1.0 }
    }

    /// Unit-cube inputs and zero-mean, unit-variance responses.
    pub fn from_data(x: &DesignMatrix<f64>, y: &[f64]) -> Self {
        let d = x.d();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in 0..x.n() {
            for (j, v) in x.row(i).iter().enumerate() {
                lo[j] = lo[j].min(*v);
                hi[j] = hi[j].max(*v);
            }
        }
        let x_scale = lo.iter().zip(&hi).map(|(a, b)| if b > a { b - a } else { 1.0 }).collect();
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let ss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
        let y_sd = if y.len() > 1 && ss > 0.0 { (ss / (n - 1.0)).sqrt() } else { 1.0 };
        Standardization { x_offset: lo, x_scale, y_mean, y_sd }
    }

    pub fn scale_x(&self, x: &DesignMatrix<f64>) -> Result<DesignMatrix<f64>> {
        if x.d() != self.x_offset.len() {
            return Err(Error::Data(format!(
                "inputs have {} columns, the model was fit with {}",
                x.d(),
                self.x_offset.len()
            )));
        }
        let d = x.d();
        let data = (0..x.n())
            .flat_map(|i| x.row(i).iter().enumerate().map(|(j, v)| (v - self.x_offset[j]) / self.x_scale[j]))
            .collect::<Vec<_>>();
        DesignMatrix::from_row_major(x.n(), d, data)
    }

    pub fn scale_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_mean) / self.y_sd).collect()
    }

    pub fn unscale_mean(&self, v: f64) -> f64 {
        v * self.y_sd + self.y_mean
    }

    pub fn unscale_variance(&self, v: f64) -> f64 {
        v * self.y_sd * self.y_sd
    }
}

/// One latent layer of a stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSample {
    pub thetas: Vec<f64>,
    /// `n x p`, row-major.
    pub values: Vec<f64>,
}

/// A stored chain state, in standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub iteration: usize,
    pub latent: Vec<LayerSample>,
    pub theta_outer: f64,
    pub g: f64,
    pub tau2: f64,
    /// Profiled outer log-likelihood.
    pub logl: f64,
}

impl Sample {
    pub(crate) fn of(state: &State, iteration: usize) -> Self {
        Sample {
            iteration,
            latent: state
                .latent
                .iter()
                .map(|l| LayerSample { thetas: l.thetas.clone(), values: l.values.matrix().as_slice().to_vec() })
                .collect(),
            theta_outer: state.outer.theta,
            g: state.outer.g,
            tau2: state.outer.tau2,
            logl: state.outer.logl,
        }
    }

    /// Latent layer `l` as an `n x p` design.
    pub fn layer(&self, l: usize, n: usize) -> Result<DesignMatrix<f64>> {
        let s = &self.latent[l];
        DesignMatrix::from_row_major(n, s.thetas.len(), s.values.clone())
    }
}

/// Output of [`fit`](super::fit): the retained samples plus everything
/// needed to predict from them or to extend the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpTrace {
    pub format: String,
    pub version: u32,
    pub config: SamplerConfig,
    pub n: usize,
    pub d: usize,
    pub width: usize,
    /// Training inputs after standardization, row-major.
    pub x: Vec<f64>,
    /// Training responses after standardization.
    pub y: Vec<f64>,
    pub standardization: Standardization,
    /// One per latent layer, then the outer layer.
    pub plans: Vec<LayerPlan>,
    /// Iterations after this one are candidates for retention.
    pub retain_from: usize,
    pub iterations: usize,
    /// Position of the sampler's random stream.
    pub rng_word_pos: u128,
    pub acceptance: Acceptance,
    /// Current chain state, retained or not.
    pub last: Sample,
    pub samples: Vec<Sample>,
}

impl DgpTrace {
    pub fn design(&self) -> Result<DesignMatrix<f64>> {
        DesignMatrix::from_row_major(self.n, self.d, self.x.clone())
    }

    pub fn latent_layers(&self) -> usize {
        self.plans.len() - 1
    }

    pub(crate) fn model(&self) -> Result<Model> {
        Ok(Model {
            x: self.design()?,
            y: self.y.clone(),
            kernel: self.config.kernel,
            prior: self.config.theta_prior,
            proposal: self.config.proposal,
            nugget: self.config.nugget,
            plans: self.plans.clone(),
        })
    }

    pub(crate) fn state(&self, model: &Model, sample: &Sample) -> Result<State> {
        let values = (0..sample.latent.len()).map(|l| sample.layer(l, self.n)).collect::<Result<_>>()?;
        let thetas = sample.latent.iter().map(|l| l.thetas.clone()).collect();
        State::new(model, values, thetas, sample.theta_outer, sample.g)
    }

    /// Difference between the stored log-likelihood of retained sample
    /// `t` and a recomputation from its parameters.
    pub fn sample_coherence(&self, t: usize) -> Result<f64> {
        let s = self.samples.get(t).ok_or_else(|| Error::invalid("sample index out of range"))?;
        let model = self.model()?;
        let state = self.state(&model, s)?;
        Ok((state.outer.logl - s.logl).abs().max((state.outer.tau2 - s.tau2).abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let trace: DgpTrace = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        trace.check()?;
        Ok(trace)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(m));
        if self.format != TRACE_FORMAT {
            return bad(format!("not a trace file (format `{}`)", self.format));
        }
        if self.version != TRACE_VERSION {
            return bad(format!("unsupported trace version {}", self.version));
        }
        if self.x.len() != self.n * self.d || self.y.len() != self.n || self.plans.is_empty() {
            return bad("array sizes disagree with the header".into());
        }
        for plan in &self.plans {
            if plan.ordering().len() != self.n {
                return bad("plan size disagrees with n".into());
            }
            if let LayerPlan::Vecchia(p) = plan {
                p.validate().map_err(|e| Error::Format(e.to_string()))?;
            }
        }
        let layers = self.latent_layers();
        for s in self.samples.iter().chain(std::iter::once(&self.last)) {
            if s.latent.len() != layers
                || s.latent.iter().any(|l| l.thetas.len() != self.width || l.values.len() != self.n * self.width)
            {
                return bad(format!("sample at iteration {} has the wrong shape", s.iteration));
            }
        }
        Ok(())
    }
}
