//! Gibbs sampling for one-layer GPs and deep GPs.
//!
//! Lengthscales (and optionally the nugget) move by Metropolis-Hastings with
//! a multiplicative uniform proposal; latent layers move by elliptical slice
//! sampling. Orderings and conditioning sets are fixed for the length of a
//! chain segment; [`continue_fit`] with `re_approx` is the only way to change
//! them, and it restarts the retained sample set.

mod config;
mod ess;
mod state;
mod trace;

use std::sync::Arc;

pub use config::{Backend, GammaPrior, NuggetMode, SamplerConfig};
pub use ess::{elliptical_slice, EssMove, MAX_SHRINKS};
pub use state::{Acceptance, Counter, LayerPlan};
pub use trace::{DgpTrace, LayerSample, Sample, Standardization, TRACE_FORMAT, TRACE_VERSION};

use state::{Model, State};

use crate::error::{Error, Result};
use crate::kernel::DesignMatrix;
use crate::rng::{derive_seed, seeded};
use crate::vecchia::{nn_conditioning, random_ordering};

pub(crate) const LABEL_ORDER: u64 = 1;
pub(crate) const LABEL_CHAIN: u64 = 2;

/// Run a fresh chain on `(x, y)`.
pub fn fit(x: &DesignMatrix<f64>, y: &[f64], config: &SamplerConfig) -> Result<DgpTrace> {
    config.validate()?;
    let (n, d) = (x.n(), x.d());
    if y.len() != n {
        return Err(Error::Data(format!("{n} input rows but {} responses", y.len())));
    }
    if n < 2 {
        return Err(Error::Data("need at least two training points".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite response at row {i}")));
    }
    let standardization =
        if config.standardize { Standardization::from_data(x, y) } else { Standardization::identity(d) };
    let xs = standardization.scale_x(x)?;
    let ys = standardization.scale_y(y);
    let layers = config.latent_layers(d);
    let width = config.latent_width(d);
    let m = config.effective_m(n);
    let plans = (0..=layers)
        .map(|l| {
            let order = random_ordering(n, derive_seed(config.seed, &[LABEL_ORDER, l as u64]))?;
            Ok(match config.backend {
                Backend::Vecchia => LayerPlan::Vecchia(Arc::new(nn_conditioning(&xs, &order, m)?)),
                Backend::Dense => LayerPlan::Dense(Arc::new(order)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = Model {
        x: xs.clone(),
        y: ys.clone(),
        kernel: config.kernel,
        prior: config.theta_prior,
        proposal: config.proposal,
        nugget: config.nugget,
        plans: plans.clone(),
    };
    let w0 = xs.leading_columns(width.max(1))?;
    let state = State::new(
        &model,
        vec![w0; layers],
        vec![vec![config.theta_init; width]; layers],
        config.theta_init,
        config.nugget.initial(),
    )?;
    let mut trace = DgpTrace {
        format: TRACE_FORMAT.into(),
        version: TRACE_VERSION,
        config: config.clone(),
        n,
        d,
        width: if layers == 0 { 0 } else { width },
        x: xs.matrix().as_slice().to_vec(),
        y: ys,
        standardization,
        plans,
        retain_from: config.burn_in,
        iterations: 0,
        rng_word_pos: 0,
        acceptance: Acceptance::new(layers, width),
        last: Sample::of(&state, 0),
        samples: Vec::new(),
    };
    run(&mut trace, &model, state, config.n_mcmc)?;
    Ok(trace)
}

/// Extend a chain by `extra` iterations. With `re_approx`, the conditioning
/// sets of every layer fed by a latent layer are recomputed in the current
/// warped inputs (orderings kept), earlier samples are dropped and retention
/// restarts, thinned, from the current iteration.
pub fn continue_fit(trace: &DgpTrace, extra: usize, re_approx: bool) -> Result<DgpTrace> {
    if trace.iterations == 0 {
        return Err(Error::invalid("cannot continue a chain that never ran"));
    }
    if extra == 0 && !re_approx {
        return Ok(trace.clone());
    }
    let mut trace = trace.clone();
    let mut model = trace.model()?;
    if re_approx {
        for l in 1..model.plans.len() {
            let input = trace.last.layer(l - 1, trace.n)?;
            model.plans[l] = model.plans[l].recondition(&input)?;
        }
        trace.plans = model.plans.clone();
        trace.samples.clear();
        trace.retain_from = trace.iterations;
    }
    let state = trace.state(&model, &trace.last)?;
    run(&mut trace, &model, state, extra)?;
    Ok(trace)
}

fn run(trace: &mut DgpTrace, model: &Model, mut state: State, iterations: usize) -> Result<()> {
    let mut rng = seeded(derive_seed(trace.config.seed, &[LABEL_CHAIN]));
    rng.set_word_pos(trace.rng_word_pos);
    let thin = trace.config.thin;
    for _ in 0..iterations {
        state.gibbs_iteration(model, &mut rng, &mut trace.acceptance)?;
        trace.iterations += 1;
        let t = trace.iterations;
        if t > trace.retain_from && (t - trace.retain_from).is_multiple_of(thin) {
            trace.samples.push(Sample::of(&state, t));
        }
    }
    trace.last = Sample::of(&state, trace.iterations);
    trace.rng_word_pos = rng.get_word_pos();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;

    fn data(n: usize) -> (DesignMatrix<f64>, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = (i as f64 * 0.618).fract();
                vec![4.0 * t - 2.0, 4.0 * (i as f64 / n as f64) - 2.0]
            })
            .collect();
        let y = rows.iter().map(|r| (r[0] * r[1]).sin() + 0.1 * r[0]).collect();
        (DesignMatrix::from_rows(&rows).unwrap(), y)
    }

    fn small(n_mcmc: usize, burn_in: usize, thin: usize) -> SamplerConfig {
        SamplerConfig { n_mcmc, burn_in, thin, m: 8, seed: 4, ..Default::default() }
    }

    #[test]
    fn retained_count() {
        let (x, y) = data(25);
        let c = small(7, 4, 3);
        let t = fit(&x, &y, &c).unwrap();
        assert_eq!(t.samples.len(), 1);
        assert_eq!(t.samples[0].iteration, 7);
        let c = small(20, 5, 4);
        assert_eq!(fit(&x, &y, &c).unwrap().samples.len(), c.retained());
    }

    #[test]
    fn samples_are_coherent() {
        let (x, y) = data(25);
        let t = fit(&x, &y, &small(12, 2, 2)).unwrap();
        for i in 0..t.samples.len() {
            assert!(t.sample_coherence(i).unwrap() < 1e-10);
            assert!(t.samples[i].tau2 > 0.0);
        }
    }

    #[test]
    fn deterministic_and_resumable() {
        let (x, y) = data(20);
        let long = fit(&x, &y, &small(16, 4, 2)).unwrap();
        assert_eq!(long, fit(&x, &y, &small(16, 4, 2)).unwrap());
        let short = fit(&x, &y, &small(9, 4, 2)).unwrap();
        let resumed = continue_fit(&short, 7, false).unwrap();
        assert_eq!(resumed.samples, long.samples);
        assert_eq!(resumed.last, long.last);
        assert_eq!(continue_fit(&short, 0, false).unwrap(), short);
    }

    #[test]
    fn re_approx_restarts_retention() {
        let (x, y) = data(20);
        let t = fit(&x, &y, &small(10, 4, 2)).unwrap();
        let r = continue_fit(&t, 6, true).unwrap();
        assert_eq!(r.samples.len(), 3);
        assert_eq!(r.samples[0].iteration, 12);
        assert_eq!(r.plans[0], t.plans[0]);
        assert_eq!(r.plans[1].ordering(), t.plans[1].ordering());
    }

    #[test]
    fn one_layer_has_no_latent_state() {
        let (x, y) = data(15);
        let c = SamplerConfig { depth: 1, kernel: KernelFamily::SqExp, ..small(6, 2, 1) };
        let t = fit(&x, &y, &c).unwrap();
        assert_eq!(t.latent_layers(), 0);
        assert!(t.samples.iter().all(|s| s.latent.is_empty()));
        assert_eq!(t.acceptance.ess_moves, 0);
    }

    #[test]
    fn trace_json_roundtrip() {
        let (x, y) = data(12);
        let t = fit(&x, &y, &small(5, 1, 2)).unwrap();
        let back = DgpTrace::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(DgpTrace::from_json("{}").is_err());
    }

    #[test]
    fn rejects_bad_data() {
        let (x, mut y) = data(10);
        y[3] = f64::NAN;
        assert!(matches!(fit(&x, &y, &small(5, 1, 1)), Err(Error::Data(_))));
        assert!(matches!(fit(&x, &y[..4], &small(5, 1, 1)), Err(Error::Data(_))));
    }
}
