use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vdgp::bench::{ExperimentConfig, ModelKind, ModelSpec, TestFunction};
use vdgp::mcmc::SamplerConfig;
use vdgp::predict::LatentMapping;

use crate::error::CliError;

/// File locations; any of them can also come from the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub covariance: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    /// Pointwise moments only; `false` adds the joint covariance.
    pub lite: bool,
    pub m_pred: Option<usize>,
    pub mapping: LatentMapping,
    pub test_conditioning: bool,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection { lite: true, m_pred: None, mapping: LatentMapping::Sample, test_conditioning: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub function: TestFunction,
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub reps: usize,
    pub models: Vec<ModelSpec>,
    pub m_pred: Option<usize>,
    pub timings: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        ExperimentSection {
            function: e.function,
            n_train: e.n_train,
            n_test: e.n_test,
            noise_sd: e.noise_sd,
            reps: e.reps,
            models: vec![ModelSpec::new(ModelKind::VecchiaDgp), ModelSpec::new(ModelKind::VecchiaGp)],
            m_pred: e.m_pred,
            timings: e.timings,
        }
    }
}

/// Everything a run needs. Defaults: `m = 25`, depth 2, Matérn 5/2, nugget
/// fixed at `1e-8`, 3000 iterations with 1000 burn-in and thinning 2.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Worker threads; results do not depend on it.
    pub threads: Option<usize>,
    pub data: DataPaths,
    pub sampler: SamplerConfig,
    /// Re-approximate after the chain: conditioning sets are recomputed in
    /// the warped inputs and `n_mcmc - burn_in` further iterations run.
    pub re_approx: bool,
    pub predict: PredictSection,
    pub experiment: ExperimentSection,
}

/// The part of a configuration that determines results, echoed into every
/// output file.
#[derive(Serialize)]
struct Echo<'a> {
    sampler: &'a SamplerConfig,
    re_approx: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    predict: Option<&'a PredictSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    experiment: Option<&'a ExperimentSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fit,
    Predict,
    Benchmark,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            function: e.function,
            n_train: e.n_train,
            n_test: e.n_test,
            noise_sd: e.noise_sd,
            reps: e.reps,
            models: e.models.clone(),
            sampler: self.sampler.clone(),
            m_pred: e.m_pred,
            seed: self.sampler.seed,
            timings: e.timings,
        }
    }

    /// Header lines for an output of `stage`.
    pub fn echo(&self, stage: Stage) -> Result<Vec<String>, CliError> {
        let echo = Echo {
            sampler: &self.sampler,
            re_approx: self.re_approx,
            predict: (stage == Stage::Predict).then_some(&self.predict),
            experiment: (stage == Stage::Benchmark).then_some(&self.experiment),
        };
        let text = toml::to_string(&echo).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(vec![format!("vdgp {}", env!("CARGO_PKG_VERSION")), text])
    }
}
