//! Posterior prediction from a retained chain.
//!
//! Each retained sample maps the test inputs through the latent layers, then
//! yields Gaussian moments at the outer layer; moments are combined over
//! samples by the law of total variance. Note that the combined predictive
//! is a mixture, not a Gaussian: the mean and variance are exact summaries,
//! but quantiles derived from them are approximations.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{DesignMatrix, KernelSpec};
use crate::linalg::{dot, Matrix};
use crate::mcmc::{DgpTrace, Sample};
use crate::rng::{derive_seed, substream};
use crate::vecchia::{conditional_moments, nearest_neighbors, random_ordering};

const LABEL_LATENT: u64 = 3;
const LABEL_TEST_ORDER: u64 = 4;

/// How test inputs are pushed through a latent layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentMapping {
    /// One Gaussian draw per test point and node.
    #[default]
    Sample,
    /// The conditional mean.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOptions {
    /// Neighbours per test point; `None` uses the training `m`. Capped at
    /// the number of candidates, so full conditioning needs `m_pred >= n`
    /// (plus earlier test points in joint mode).
    pub m_pred: Option<usize>,
    pub mapping: LatentMapping,
    /// Joint mode only: allow test points to condition on earlier ones.
    pub test_conditioning: bool,
    /// Keep the moments of every retained sample.
    pub keep_samples: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions { m_pred: None, mapping: LatentMapping::Sample, test_conditioning: true, keep_samples: false }
    }
}

/// Moments from one retained sample, in response units.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub cov: Option<Matrix<f64>>,
}

/// Aggregated predictive moments, in response units.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub joint_cov: Option<Matrix<f64>>,
    pub samples: Vec<SampleMoments>,
}

struct Context<'a> {
    trace: &'a DgpTrace,
    x: DesignMatrix<f64>,
    xtest: DesignMatrix<f64>,
    m: usize,
    /// Nearest training inputs of every test input, closest first.
    nn_x: Vec<Vec<usize>>,
    mapping: LatentMapping,
}

impl<'a> Context<'a> {
    fn new(trace: &'a DgpTrace, xtest: &DesignMatrix<f64>, opts: &PredictOptions) -> Result<Self> {
        if trace.samples.is_empty() {
            return Err(Error::invalid("trace holds no retained samples"));
        }
        let xtest = trace.standardization.scale_x(xtest)?;
        let x = trace.design()?;
        let m = opts.m_pred.unwrap_or(trace.config.m);
        if m == 0 {
            return Err(Error::Config("m_pred must be at least 1".into()));
        }
        let nn_x = (0..xtest.n()).into_par_iter().map(|i| nearest_neighbors(xtest.row(i), &x, m)).collect();
        Ok(Context { trace, x, xtest, m, nn_x, mapping: opts.mapping })
    }

    fn seed(&self) -> u64 {
        self.trace.config.seed
    }

    /// Training and test inputs of the outer layer for sample `t`.
    fn warp(&self, t: usize) -> Result<(DesignMatrix<f64>, DesignMatrix<f64>)> {
        let s = &self.trace.samples[t];
        let mut train = self.x.clone();
        let mut test = self.xtest.clone();
        for l in 0..s.latent.len() {
            let values = s.layer(l, self.trace.n)?;
            let mapped = self.map_layer(t, l, s, &train, &test, &values)?;
            train = values;
            test = mapped;
        }
        Ok((train, test))
    }

    fn neighbors(&self, l: usize, train: &DesignMatrix<f64>, test: &DesignMatrix<f64>, i: usize) -> Vec<usize> {
        if l == 0 {
            self.nn_x[i].clone()
        } else {
            nearest_neighbors(test.row(i), train, self.m)
        }
    }

    fn map_layer(
        &self,
        t: usize,
        l: usize,
        s: &Sample,
        train: &DesignMatrix<f64>,
        test: &DesignMatrix<f64>,
        values: &DesignMatrix<f64>,
    ) -> Result<DesignMatrix<f64>> {
        let thetas = &s.latent[l].thetas;
        let p = thetas.len();
        let specs = thetas
            .iter()
            .map(|&th| KernelSpec::correlation(self.trace.config.kernel, th))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<f64>> = (0..test.n())
            .into_par_iter()
            .map(|i| {
                let nbrs = self.neighbors(l, train, test, i);
                let locs: Vec<&[f64]> = nbrs.iter().map(|&j| train.row(j)).collect();
                let mut rng = substream(self.seed(), &[LABEL_LATENT, t as u64, l as u64, i as u64]);
                let mut out = Vec::with_capacity(p);
                for (k, spec) in specs.iter().enumerate() {
                    let cm = conditional_moments(test.row(i), &locs, spec, i)?;
                    let yc: Vec<f64> = nbrs.iter().map(|&j| values.row(j)[k]).collect();
                    let mu = cm.mean(&yc);
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(match self.mapping {
                        LatentMapping::Sample => mu + cm.variance.sqrt() * z,
                        LatentMapping::Mean => mu,
                    });
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        DesignMatrix::from_rows(&rows)
    }

    fn outer_spec(&self, s: &Sample) -> Result<KernelSpec<f64>> {
        KernelSpec::new(self.trace.config.kernel, s.theta_outer, 1.0, s.g)
    }

    /// Pointwise outer moments of sample `t`, standardized units.
    fn independent(&self, t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = &self.trace.samples[t];
        let (train, test) = self.warp(t)?;
        let spec = self.outer_spec(s)?;
        let l = s.latent.len();
        let pairs: Vec<(f64, f64)> = (0..test.n())
            .into_par_iter()
            .map(|i| {
                let nbrs = self.neighbors(l, &train, &test, i);
                let locs: Vec<&[f64]> = nbrs.iter().map(|&j| train.row(j)).collect();
                let cm = conditional_moments(test.row(i), &locs, &spec, i)?;
                let yc: Vec<f64> = nbrs.iter().map(|&j| self.trace.y[j]).collect();
                Ok((dot(&cm.weights, &yc), cm.variance * s.tau2))
            })
            .collect::<Result<_>>()?;
        Ok(pairs.into_iter().unzip())
    }

    /// Joint outer moments of sample `t`, standardized units, with test
    /// points placed after all training points in a fixed random order.
    fn joint(&self, t: usize, test_conditioning: bool) -> Result<(Vec<f64>, Matrix<f64>)> {
        let s = &self.trace.samples[t];
        let (train, test) = self.warp(t)?;
        let spec = self.outer_spec(s)?;
        let (n, np) = (train.n(), test.n());
        let order = random_ordering(np, derive_seed(self.seed(), &[LABEL_TEST_ORDER]))?;
        let mut mu = vec![0.0; np];
        let mut d = vec![0.0; np];
        // rows of (I - A)^{-1} in test positions, unit lower triangular
        let mut linv = Matrix::zeros(np, np);
        for q in 0..np {
            let i = order.index(q);
            let earlier: Vec<&[f64]> =
                if test_conditioning { (0..q).map(|r| test.row(order.index(r))).collect() } else { Vec::new() };
            let nbrs = crate::vecchia::nearest_neighbors_stacked(test.row(i), &train, &earlier, self.m);
            let locs: Vec<&[f64]> = nbrs.iter().map(|&j| if j < n { train.row(j) } else { earlier[j - n] }).collect();
            let cm = conditional_moments(test.row(i), &locs, &spec, n + q)?;
            let vc: Vec<f64> = nbrs.iter().map(|&j| if j < n { self.trace.y[j] } else { mu[j - n] }).collect();
            mu[q] = dot(&cm.weights, &vc);
            d[q] = cm.variance;
            linv[(q, q)] = 1.0;
            for (&j, &b) in nbrs.iter().zip(&cm.weights) {
                if j >= n {
                    let r = j - n;
                    for c in 0..=r {
                        let v = linv[(r, c)];
                        linv[(q, c)] += b * v;
                    }
                }
            }
        }
        let mut cov = Matrix::zeros(np, np);
        for a in 0..np {
            for b in 0..=a {
                let mut acc = 0.0;
                for k in 0..=b {
                    acc += linv[(a, k)] * d[k] * linv[(b, k)];
                }
                let v = acc * s.tau2;
                let (ia, ib) = (order.index(a), order.index(b));
                cov[(ia, ib)] = v;
                cov[(ib, ia)] = v;
            }
        }
        Ok((order.unpermute(&mu), cov))
    }
}

/// Mean over samples plus the total-variance combination of per-sample
/// covariance entries `sigma(t)` and mean deviations.
fn total(means: &[Vec<f64>], sigma: impl Fn(usize) -> f64, i: usize, j: usize, center: &[f64]) -> f64 {
    let tn = means.len() as f64;
    let mut within = 0.0;
    let mut between = 0.0;
    for (t, m) in means.iter().enumerate() {
        within += sigma(t);
        between += (m[i] - center[i]) * (m[j] - center[j]);
    }
    within / tn + between / tn
}

fn center(means: &[Vec<f64>]) -> Vec<f64> {
    let np = means[0].len();
    let tn = means.len() as f64;
    (0..np).map(|i| means.iter().map(|m| m[i]).sum::<f64>() / tn).collect()
}

/// Pointwise predictive moments at the rows of `xtest` (input units).
pub fn predict_independent(
    trace: &DgpTrace,
    xtest: &DesignMatrix<f64>,
    opts: &PredictOptions,
) -> Result<PredictionResult> {
    let ctx = Context::new(trace, xtest, opts)?;
    let per: Vec<(Vec<f64>, Vec<f64>)> =
        (0..trace.samples.len()).into_par_iter().map(|t| ctx.independent(t)).collect::<Result<_>>()?;
    let means: Vec<Vec<f64>> = per.iter().map(|p| p.0.clone()).collect();
    let mu = center(&means);
    let variance = (0..mu.len()).map(|i| total(&means, |t| per[t].1[i], i, i, &mu)).collect();
    let st = &trace.standardization;
    let samples = if opts.keep_samples {
        per.iter()
            .map(|(m, v)| SampleMoments {
                mean: m.iter().map(|x| st.unscale_mean(*x)).collect(),
                variance: v.iter().map(|x| st.unscale_variance(*x)).collect(),
                cov: None,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(PredictionResult {
        mean: unscale_mean(trace, &mu),
        variance: unscale_var(trace, variance),
        joint_cov: None,
        samples,
    })
}

/// Joint predictive mean and covariance at the rows of `xtest`.
pub fn predict_joint(trace: &DgpTrace, xtest: &DesignMatrix<f64>, opts: &PredictOptions) -> Result<PredictionResult> {
    let ctx = Context::new(trace, xtest, opts)?;
    let per: Vec<(Vec<f64>, Matrix<f64>)> = (0..trace.samples.len())
        .into_par_iter()
        .map(|t| ctx.joint(t, opts.test_conditioning))
        .collect::<Result<_>>()?;
    let means: Vec<Vec<f64>> = per.iter().map(|p| p.0.clone()).collect();
    let mu = center(&means);
    let np = mu.len();
    let mut cov = Matrix::zeros(np, np);
    for i in 0..np {
        for j in 0..=i {
            let v = total(&means, |t| per[t].1[(i, j)], i, j, &mu);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let variance = (0..np).map(|i| cov[(i, i)]).collect();
    let st = &trace.standardization;
    let unscale = |c: &Matrix<f64>| Matrix::from_fn(np, np, |i, j| st.unscale_variance(c[(i, j)]));
    let samples = if opts.keep_samples {
        per.iter()
            .map(|(m, c)| SampleMoments {
                mean: m.iter().map(|x| st.unscale_mean(*x)).collect(),
                variance: (0..np).map(|i| st.unscale_variance(c[(i, i)])).collect(),
                cov: Some(unscale(c)),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(PredictionResult {
        mean: unscale_mean(trace, &mu),
        variance: unscale_var(trace, variance),
        joint_cov: Some(unscale(&cov)),
        samples,
    })
}

fn unscale_mean(trace: &DgpTrace, v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| trace.standardization.unscale_mean(*x)).collect()
}

fn unscale_var(trace: &DgpTrace, v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| trace.standardization.unscale_variance(x)).collect()
}
