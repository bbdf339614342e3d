//! Layered model state and the individual Gibbs moves.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{GammaPrior, NuggetMode};
use super::ess::elliptical_slice;
use crate::dense::DenseFactor;
use crate::error::{Error, Result};
use crate::kernel::{DesignMatrix, KernelFamily, KernelSpec};
use crate::rng::Rng;
use crate::vecchia::{build_u, nn_conditioning, ConditioningPlan, Ordering, SparseUpperFactor};

/// Fixed conditioning structure of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerPlan {
    Vecchia(Arc<ConditioningPlan>),
    Dense(Arc<Ordering>),
}

impl LayerPlan {
    pub fn ordering(&self) -> &Ordering {
        match self {
            LayerPlan::Vecchia(p) => p.ordering(),
            LayerPlan::Dense(o) => o,
        }
    }

    /// Same ordering and size, nearest neighbours recomputed in `locations`.
    pub fn recondition(&self, locations: &DesignMatrix<f64>) -> Result<LayerPlan> {
        Ok(match self {
            LayerPlan::Vecchia(p) => LayerPlan::Vecchia(Arc::new(nn_conditioning(locations, p.ordering(), p.m())?)),
            LayerPlan::Dense(o) => LayerPlan::Dense(Arc::clone(o)),
        })
    }

    pub(crate) fn build(&self, locations: &DesignMatrix<f64>, spec: &KernelSpec<f64>) -> Result<LayerFactor> {
        Ok(match self {
            LayerPlan::Vecchia(p) => LayerFactor::Sparse(build_u(locations, p, spec)?),
            LayerPlan::Dense(o) => LayerFactor::Dense(DenseFactor::build(locations, o, spec)?),
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum LayerFactor {
    Sparse(SparseUpperFactor<f64>),
    Dense(DenseFactor<f64>),
}

impl LayerFactor {
    pub fn loglik(&self, y: &[f64]) -> Result<f64> {
        match self {
            LayerFactor::Sparse(f) => f.loglik(y),
            LayerFactor::Dense(f) => f.loglik(y),
        }
    }

    pub fn profiled_loglik(&self, y: &[f64]) -> Result<(f64, f64)> {
        match self {
            LayerFactor::Sparse(f) => f.profiled_loglik(y),
            LayerFactor::Dense(f) => f.profiled_loglik(y),
        }
    }

    pub fn sample(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            LayerFactor::Sparse(f) => f.sample(z),
            LayerFactor::Dense(f) => f.sample(z),
        }
    }
}

/// Acceptance counts of one kind of MH move.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub proposed: u64,
    pub accepted: u64,
}

impl Counter {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }
}

/// Sampler diagnostics accumulated over a chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    /// Per latent layer, per node.
    pub theta_latent: Vec<Vec<Counter>>,
    pub theta_outer: Counter,
    pub nugget: Counter,
    pub ess_moves: u64,
    pub ess_evaluations: u64,
}

impl Acceptance {
    pub(crate) fn new(layers: usize, width: usize) -> Self {
        Acceptance { theta_latent: vec![vec![Counter::default(); width]; layers], ..Default::default() }
    }

    /// Mean likelihood evaluations per slice move.
    pub fn ess_cost(&self) -> f64 {
        if self.ess_moves == 0 {
            0.0
        } else {
            self.ess_evaluations as f64 / self.ess_moves as f64
        }
    }
}

/// Everything fixed during a chain segment.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub x: DesignMatrix<f64>,
    pub y: Vec<f64>,
    pub kernel: KernelFamily,
    pub prior: GammaPrior,
    pub proposal: (f64, f64),
    pub nugget: NuggetMode,
    /// One per latent layer, then the outer layer.
    pub plans: Vec<LayerPlan>,
}

#[derive(Debug, Clone)]
pub(crate) struct Latent {
    pub values: DesignMatrix<f64>,
    pub thetas: Vec<f64>,
    pub factors: Vec<LayerFactor>,
    /// Prior log density of each node.
    pub node_ll: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Outer {
    pub theta: f64,
    pub g: f64,
    pub logl: f64,
    pub tau2: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct State {
    pub latent: Vec<Latent>,
    pub outer: Outer,
}

enum Downstream {
    Latent { factors: Vec<LayerFactor>, node_ll: Vec<f64> },
    Outer(Outer),
}

impl Downstream {
    fn total(&self) -> f64 {
        match self {
            Downstream::Latent { node_ll, .. } => node_ll.iter().sum(),
            Downstream::Outer(o) => o.logl,
        }
    }
}

fn latent_layer(
    model: &Model,
    l: usize,
    input: &DesignMatrix<f64>,
    values: &DesignMatrix<f64>,
    thetas: &[f64],
) -> Result<(Vec<LayerFactor>, Vec<f64>)> {
    let mut factors = Vec::with_capacity(thetas.len());
    let mut node_ll = Vec::with_capacity(thetas.len());
    for (k, &theta) in thetas.iter().enumerate() {
        let f = model.plans[l].build(input, &KernelSpec::correlation(model.kernel, theta)?)?;
        node_ll.push(f.loglik(&values.column(k))?);
        factors.push(f);
    }
    Ok((factors, node_ll))
}

fn outer_layer(model: &Model, input: &DesignMatrix<f64>, theta: f64, g: f64) -> Result<Outer> {
    let spec = KernelSpec::new(model.kernel, theta, 1.0, g)?;
    let factor = model.plans[model.plans.len() - 1].build(input, &spec)?;
    let (logl, tau2) = factor.profiled_loglik(&model.y)?;
    Ok(Outer { theta, g, logl, tau2 })
}

/// Multiplicative uniform proposal; `None` when the reverse move could not
/// reach `current` or the prior vanishes.
fn propose(current: f64, window: (f64, f64), rng: &mut Rng) -> Option<f64> {
    let (l, u) = window;
    let next = current * (l + (u - l) * rng.random::<f64>());
    (current >= l * next && current <= u * next).then_some(next)
}

fn accept(log_ratio: f64, rng: &mut Rng) -> bool {
    rng.random::<f64>().ln() < log_ratio
}

/// Turn numerical failures into `None` (a rejection); keep other errors.
fn feasible<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_numerical() => Ok(None),
        Err(e) => Err(e),
    }
}

impl State {
    pub fn new(
        model: &Model,
        values: Vec<DesignMatrix<f64>>,
        thetas: Vec<Vec<f64>>,
        theta_outer: f64,
        g: f64,
    ) -> Result<State> {
        if values.len() != thetas.len() || values.len() + 1 != model.plans.len() {
            return Err(Error::invalid("layer count differs from the conditioning plans"));
        }
        let mut latent: Vec<Latent> = Vec::with_capacity(values.len());
        for (l, (vals, th)) in values.into_iter().zip(thetas).enumerate() {
            if vals.n() != model.x.n() || th.len() != vals.d() {
                return Err(Error::invalid(format!("latent layer {l} has inconsistent shape")));
            }
            let input = if l == 0 { &model.x } else { &latent[l - 1].values };
            let (factors, node_ll) = latent_layer(model, l, input, &vals, &th)?;
            latent.push(Latent { values: vals, thetas: th, factors, node_ll });
        }
        let input = latent.last().map_or(&model.x, |l| &l.values);
        let outer = outer_layer(model, input, theta_outer, g)?;
        Ok(State { latent, outer })
    }

    pub fn input<'a>(&'a self, model: &'a Model, l: usize) -> &'a DesignMatrix<f64> {
        if l == 0 {
            &model.x
        } else {
            &self.latent[l - 1].values
        }
    }

    fn outer_input<'a>(&'a self, model: &'a Model) -> &'a DesignMatrix<f64> {
        self.input(model, self.latent.len())
    }

    /// Largest difference between cached log-likelihoods and a rebuild.
    #[cfg(test)]
    pub fn coherence_error(&self, model: &Model) -> Result<f64> {
        let fresh = State::new(
            model,
            self.latent.iter().map(|l| l.values.clone()).collect(),
            self.latent.iter().map(|l| l.thetas.clone()).collect(),
            self.outer.theta,
            self.outer.g,
        )?;
        let mut err = (fresh.outer.logl - self.outer.logl).abs();
        err = err.max((fresh.outer.tau2 - self.outer.tau2).abs());
        for (a, b) in fresh.latent.iter().zip(&self.latent) {
            for (x, y) in a.node_ll.iter().zip(&b.node_ll) {
                err = err.max((x - y).abs());
            }
        }
        Ok(err)
    }

    fn downstream_loglik(&self, l: usize) -> f64 {
        match self.latent.get(l + 1) {
            Some(next) => next.node_ll.iter().sum(),
            None => self.outer.logl,
        }
    }

    fn downstream(&self, model: &Model, l: usize, values: &DesignMatrix<f64>) -> Result<Downstream> {
        match self.latent.get(l + 1) {
            Some(next) => {
                let (factors, node_ll) = latent_layer(model, l + 1, values, &next.values, &next.thetas)?;
                Ok(Downstream::Latent { factors, node_ll })
            }
            None => Ok(Downstream::Outer(outer_layer(model, values, self.outer.theta, self.outer.g)?)),
        }
    }

    pub fn mh_latent_theta(
        &mut self,
        model: &Model,
        l: usize,
        k: usize,
        rng: &mut Rng,
        acc: &mut Acceptance,
    ) -> Result<()> {
        let theta = self.latent[l].thetas[k];
        let accepted = match propose(theta, model.proposal, rng) {
            Some(next) if model.prior.log_density(next).is_finite() => {
                let column = self.latent[l].values.column(k);
                let built = feasible(
                    KernelSpec::correlation(model.kernel, next)
                        .and_then(|spec| model.plans[l].build(self.input(model, l), &spec))
                        .and_then(|f| Ok((f.loglik(&column)?, f))),
                )?;
                match built {
                    Some((ll, factor)) => {
                        let ratio = ll - self.latent[l].node_ll[k] + model.prior.log_density(next)
                            - model.prior.log_density(theta)
                            + theta.ln()
                            - next.ln();
                        let ok = accept(ratio, rng);
                        if ok {
                            let layer = &mut self.latent[l];
                            layer.thetas[k] = next;
                            layer.factors[k] = factor;
                            layer.node_ll[k] = ll;
                        }
                        ok
                    }
                    None => false,
                }
            }
            _ => false,
        };
        acc.theta_latent[l][k].record(accepted);
        Ok(())
    }

    /// Shared MH step for the outer lengthscale (`nugget = false`) or nugget.
    pub fn mh_outer(&mut self, model: &Model, nugget: bool, rng: &mut Rng, acc: &mut Acceptance) -> Result<()> {
        let current = if nugget { self.outer.g } else { self.outer.theta };
        let log_prior = |v: f64| {
            if nugget {
                model.nugget.log_prior(v)
            } else {
                model.prior.log_density(v)
            }
        };
        let accepted = match propose(current, model.proposal, rng) {
            Some(next) if log_prior(next).is_finite() => {
                let (theta, g) = if nugget { (self.outer.theta, next) } else { (next, self.outer.g) };
                match feasible(outer_layer(model, self.outer_input(model), theta, g))? {
                    Some(outer) => {
                        let ratio = outer.logl - self.outer.logl + log_prior(next) - log_prior(current) + current.ln()
                            - next.ln();
                        let ok = accept(ratio, rng);
                        if ok {
                            self.outer = outer;
                        }
                        ok
                    }
                    None => false,
                }
            }
            _ => false,
        };
        if nugget {
            acc.nugget.record(accepted);
        } else {
            acc.theta_outer.record(accepted);
        }
        Ok(())
    }

    pub fn ess_node(&mut self, model: &Model, l: usize, k: usize, rng: &mut Rng, acc: &mut Acceptance) -> Result<()> {
        let n = model.x.n();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let nu = self.latent[l].factors[k].sample(&z)?;
        let current = self.latent[l].values.column(k);
        let base = &self.latent[l].values;
        let mv = elliptical_slice(&current, self.downstream_loglik(l), &nu, rng, |proposal| {
            let mut values = base.clone();
            values.set_column(k, proposal);
            match self.downstream(model, l, &values) {
                Ok(d) => Some((d.total(), (values, d))),
                Err(_) => None,
            }
        })?;
        acc.ess_moves += 1;
        acc.ess_evaluations += mv.evaluations as u64;
        let (values, down) = mv.artifact;
        let layer = &mut self.latent[l];
        layer.node_ll[k] = layer.factors[k].loglik(&mv.state)?;
        layer.values = values;
        match down {
            Downstream::Latent { factors, node_ll } => {
                let next = &mut self.latent[l + 1];
                next.factors = factors;
                next.node_ll = node_ll;
            }
            Downstream::Outer(outer) => self.outer = outer,
        }
        Ok(())
    }

    /// One full sweep: inner lengthscales, outer lengthscale, nugget, then
    /// every latent node. The profiled scale is refreshed with each
    /// accepted outer-layer change.
    pub fn gibbs_iteration(&mut self, model: &Model, rng: &mut Rng, acc: &mut Acceptance) -> Result<()> {
        for l in 0..self.latent.len() {
            for k in 0..self.latent[l].thetas.len() {
                self.mh_latent_theta(model, l, k, rng, acc)?;
            }
        }
        self.mh_outer(model, false, rng, acc)?;
        if matches!(model.nugget, NuggetMode::Sampled { .. }) {
            self.mh_outer(model, true, rng, acc)?;
        }
        for l in 0..self.latent.len() {
            for k in 0..self.latent[l].thetas.len() {
                self.ess_node(model, l, k, rng, acc)?;
            }
        }
        Ok(())
    }
}
