use std::fmt;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::lhs;
use super::functions::{gfunction, schaffer2};
use super::metrics::{crps, rmse, rmspe};
use crate::error::{Error, Result};
use crate::kernel::DesignMatrix;
use crate::mcmc::{fit, Backend, DgpTrace, SamplerConfig};
use crate::predict::{predict_independent, PredictOptions};
use crate::rng::{derive_seed, substream};

const LABEL_REP: u64 = 10;
const LABEL_TRAIN: u64 = 11;
const LABEL_TEST: u64 = 12;
const LABEL_NOISE: u64 = 13;
const LABEL_CHAIN: u64 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "name")]
pub enum TestFunction {
    Schaffer2,
    Gfunction { d: usize },
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Schaffer2 => 2,
            TestFunction::Gfunction { d } => *d,
        }
    }

    /// Evaluate at a point of the unit cube, mapped onto the domain.
    pub fn eval_unit(&self, u: &[f64]) -> Result<f64> {
        match self {
            TestFunction::Schaffer2 => {
                let x: Vec<f64> = u.iter().map(|v| 4.0 * v - 2.0).collect();
                schaffer2(&x)
            }
            TestFunction::Gfunction { .. } => gfunction(u),
        }
    }

    /// Unit-cube design mapped onto the domain.
    pub fn to_domain(&self, u: &DesignMatrix<f64>) -> Result<DesignMatrix<f64>> {
        match self {
            TestFunction::Schaffer2 => {
                let data = u.matrix().as_slice().iter().map(|v| 4.0 * v - 2.0).collect();
                DesignMatrix::from_row_major(u.n(), u.d(), data)
            }
            TestFunction::Gfunction { .. } => Ok(u.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    VecchiaDgp,
    FullDgp,
    VecchiaGp,
    DenseGp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::VecchiaDgp => "vecchia-dgp",
            ModelKind::FullDgp => "full-dgp",
            ModelKind::VecchiaGp => "vecchia-gp",
            ModelKind::DenseGp => "dense-gp",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vecchia-dgp" => Ok(ModelKind::VecchiaDgp),
            "full-dgp" => Ok(ModelKind::FullDgp),
            "vecchia-gp" => Ok(ModelKind::VecchiaGp),
            "dense-gp" => Ok(ModelKind::DenseGp),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// One model column of an experiment; `m` overrides the shared sampler's
/// conditioning size (and prediction size, unless that is set globally),
/// which is how conditioning-size sweeps are expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub m: Option<usize>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec { kind, m: None }
    }

    pub fn with_m(kind: ModelKind, m: usize) -> Self {
        ModelSpec { kind, m: Some(m) }
    }

    pub fn label(&self) -> String {
        match self.m {
            Some(m) => format!("{}-m{m}", self.kind),
            None => self.kind.to_string(),
        }
    }

    /// The sampler settings this model runs with.
    pub fn sampler(&self, base: &SamplerConfig) -> SamplerConfig {
        let mut c = base.clone();
        if let Some(m) = self.m {
            c.m = m;
        }
        match self.kind {
            ModelKind::VecchiaDgp | ModelKind::FullDgp => c.depth = c.depth.max(2),
            ModelKind::VecchiaGp | ModelKind::DenseGp => c.depth = 1,
        }
        c.backend = match self.kind {
            ModelKind::VecchiaDgp | ModelKind::VecchiaGp => Backend::Vecchia,
            ModelKind::FullDgp | ModelKind::DenseGp => Backend::Dense,
        };
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub function: TestFunction,
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub reps: usize,
    pub models: Vec<ModelSpec>,
    /// Shared sampler settings; the seed is replaced per repetition.
    pub sampler: SamplerConfig,
    pub m_pred: Option<usize>,
    pub seed: u64,
    /// Record wall-clock times; off makes every output reproducible.
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            function: TestFunction::Schaffer2,
            n_train: 100,
            n_test: 500,
            noise_sd: 0.0,
            reps: 5,
            models: vec![ModelSpec::new(ModelKind::VecchiaDgp), ModelSpec::new(ModelKind::VecchiaGp)],
            sampler: SamplerConfig::default(),
            m_pred: None,
            seed: 1,
            timings: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n_train < 2 || self.n_test == 0 || self.reps == 0 {
            return bad("need n_train >= 2, n_test >= 1 and reps >= 1");
        }
        if self.models.is_empty() {
            return bad("no models listed");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be nonnegative");
        }
        if let TestFunction::Gfunction { d } = self.function {
            if d == 0 {
                return bad("gfunction needs d >= 1");
            }
        }
        let mut labels: Vec<String> = self.models.iter().map(ModelSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("model labels must be distinct");
        }
        self.sampler.validate()
    }
}

/// Scores of one model on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub rep: usize,
    pub n: usize,
    /// Conditioning size used in training.
    pub m: usize,
    pub rmse: f64,
    pub rmspe: f64,
    pub crps: f64,
    pub fit_s: f64,
    pub pred_s: f64,
    /// Posterior median of the noise variance `tau2 * g`, response units.
    pub noise_variance: f64,
}

/// A cell that failed; the run carries on without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub model: String,
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub failures: Vec<CellFailure>,
}

/// Per-model medians over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub reps: usize,
    pub rmse: f64,
    pub rmspe: f64,
    pub crps: f64,
    pub fit_s: f64,
    pub pred_s: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

impl ScoreTable {
    /// Rows of `model`, in repetition order.
    pub fn model(&self, label: &str) -> Vec<&ScoreRow> {
        self.rows.iter().filter(|r| r.model == label).collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut labels: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !labels.contains(&r.model.as_str()) {
                labels.push(&r.model);
            }
        }
        labels
            .into_iter()
            .map(|label| {
                let rows = self.model(label);
                let col = |f: fn(&ScoreRow) -> f64| median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
                SummaryRow {
                    model: label.to_string(),
                    reps: rows.len(),
                    rmse: col(|r| r.rmse),
                    rmspe: col(|r| r.rmspe),
                    crps: col(|r| r.crps),
                    fit_s: col(|r| r.fit_s),
                    pred_s: col(|r| r.pred_s),
                }
            })
            .collect()
    }
}

/// Training and test data of one repetition.
#[derive(Debug, Clone)]
pub struct RepData {
    pub x: DesignMatrix<f64>,
    pub y: Vec<f64>,
    pub xtest: DesignMatrix<f64>,
    /// Noise-free test responses.
    pub ytest: Vec<f64>,
    pub seed: u64,
}

/// Designs and responses of repetition `rep`; identical for every model.
pub fn rep_data(config: &ExperimentConfig, rep: usize) -> Result<RepData> {
    let f = config.function;
    let d = f.dim();
    let seed = derive_seed(config.seed, &[LABEL_REP, rep as u64]);
    let ux = lhs(config.n_train, d, derive_seed(seed, &[LABEL_TRAIN]))?;
    let ut = lhs(config.n_test, d, derive_seed(seed, &[LABEL_TEST]))?;
    let mut noise = substream(seed, &[LABEL_NOISE]);
    let y = (0..ux.n())
        .map(|i| Ok(f.eval_unit(ux.row(i))? + config.noise_sd * noise.sample::<f64, _>(StandardNormal)))
        .collect::<Result<Vec<_>>>()?;
    let ytest = (0..ut.n()).map(|i| f.eval_unit(ut.row(i))).collect::<Result<Vec<_>>>()?;
    Ok(RepData { x: f.to_domain(&ux)?, y, xtest: f.to_domain(&ut)?, ytest, seed })
}

fn noise_variance(trace: &DgpTrace) -> f64 {
    let sd2 = trace.standardization.y_sd * trace.standardization.y_sd;
    median(&trace.samples.iter().map(|s| s.tau2 * s.g * sd2).collect::<Vec<_>>())
}

/// Fit and score one model on one repetition.
pub fn run_cell(config: &ExperimentConfig, spec: &ModelSpec, data: &RepData, rep: usize) -> Result<ScoreRow> {
    let mut sampler = spec.sampler(&config.sampler);
    sampler.seed = derive_seed(data.seed, &[LABEL_CHAIN]);
    let started = Instant::now();
    let trace = fit(&data.x, &data.y, &sampler)?;
    let fit_s = started.elapsed().as_secs_f64();
    let opts = PredictOptions { m_pred: config.m_pred.or(spec.m), ..Default::default() };
    let started = Instant::now();
    let pred = predict_independent(&trace, &data.xtest, &opts)?;
    let pred_s = started.elapsed().as_secs_f64();
    // A vanishing predictive variance would make the score undefined.
    let sd: Vec<f64> = pred.variance.iter().map(|v| v.sqrt().max(f64::MIN_POSITIVE)).collect();
    let m = match sampler.backend {
        Backend::Vecchia => sampler.effective_m(data.x.n()),
        Backend::Dense => data.x.n() - 1,
    };
    let (fit_s, pred_s) = if config.timings { (fit_s, pred_s) } else { (0.0, 0.0) };
    Ok(ScoreRow {
        model: spec.label(),
        rep,
        n: data.x.n(),
        m,
        rmse: rmse(&pred.mean, &data.ytest)?,
        rmspe: rmspe(&pred.mean, &data.ytest)?,
        crps: crps(&data.ytest, &pred.mean, &sd)?,
        fit_s,
        pred_s,
        noise_variance: noise_variance(&trace),
    })
}

/// Every model on every repetition. Repetitions run in parallel, models
/// within a repetition one after another; failures are recorded per cell.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ScoreTable> {
    config.validate()?;
    let per_rep: Vec<Vec<std::result::Result<ScoreRow, CellFailure>>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let data = match rep_data(config, rep) {
                Ok(d) => d,
                Err(e) => {
                    return config
                        .models
                        .iter()
                        .map(|s| Err(CellFailure { model: s.label(), rep, message: e.to_string() }))
                        .collect();
                }
            };
            config
                .models
                .iter()
                .map(|spec| {
                    run_cell(config, spec, &data, rep).map_err(|e| CellFailure {
                        model: spec.label(),
                        rep,
                        message: e.to_string(),
                    })
                })
                .collect()
        })
        .collect();
    let mut table = ScoreTable::default();
    for cell in per_rep.into_iter().flatten() {
        match cell {
            Ok(row) => table.rows.push(row),
            Err(f) => table.failures.push(f),
        }
    }
    Ok(table)
}
