use vdgp::mcmc::{NuggetMode, SamplerConfig};
use vdgp::{continue_fit, fit};

#[test]
fn ess_recovers_a_conjugate_posterior() {
    let (mean_z, var_z) = vdgp_validation::ess_conjugate(1, 10_000, 500);
    assert!(mean_z < 4.0 && var_z < 4.0, "{mean_z} {var_z}");
}

#[test]
fn mh_recovers_a_known_lengthscale() {
    for seed in 0..3 {
        let mode = vdgp_validation::mh_recovery(seed, 0.2, 80, 600);
        assert!((0.1..=0.4).contains(&mode), "seed {seed}: {mode}");
    }
}

fn toy(n: usize) -> (vdgp::DesignMatrix, Vec<f64>) {
    let mut r = vdgp_validation::rng(4);
    let x = vdgp_validation::points(&mut r, n, 2);
    let y = x.iter().map(|p| (6.0 * p[0]).sin() * p[1] + 0.01 * p[0]).collect();
    (vdgp_validation::design(&x), y)
}

#[test]
fn sampled_nugget_stays_in_support_and_every_sample_is_coherent() {
    let (x, y) = toy(40);
    let config =
        SamplerConfig { n_mcmc: 120, burn_in: 60, thin: 3, m: 8, nugget: NuggetMode::sampled(), ..Default::default() };
    let t = fit(&x, &y, &config).unwrap();
    assert_eq!(t.samples.len(), 20);
    for (i, s) in t.samples.iter().enumerate() {
        assert!(s.g >= 1e-10);
        assert!(s.theta_outer >= 1e-6);
        assert!(s.latent.iter().all(|l| l.thetas.iter().all(|th| *th >= 1e-6)));
        assert!(t.sample_coherence(i).unwrap() < 1e-8);
    }
    let a = &t.acceptance;
    assert!(a.nugget.proposed == 120 && a.theta_outer.proposed == 120);
    assert!(a.theta_outer.rate() > 0.0 && a.theta_outer.rate() < 1.0);
}

#[test]
fn a_resumed_chain_equals_a_longer_one() {
    let (x, y) = toy(30);
    let short = SamplerConfig { n_mcmc: 50, burn_in: 20, thin: 2, m: 6, ..Default::default() };
    let long = SamplerConfig { n_mcmc: 90, ..short.clone() };
    let resumed = continue_fit(&fit(&x, &y, &short).unwrap(), 40, false).unwrap();
    let direct = fit(&x, &y, &long).unwrap();
    assert_eq!(resumed.samples, direct.samples);
    assert_eq!(resumed.last, direct.last);
    assert_eq!(resumed.rng_word_pos, direct.rng_word_pos);
}

#[test]
fn dense_and_full_vecchia_chains_agree() {
    let (x, y) = toy(25);
    let base = SamplerConfig { n_mcmc: 40, burn_in: 20, thin: 5, m: 24, ..Default::default() };
    let v = fit(&x, &y, &base).unwrap();
    let d = fit(&x, &y, &SamplerConfig { backend: vdgp::Backend::Dense, ..base }).unwrap();
    for (a, b) in v.samples.iter().zip(&d.samples) {
        assert!((a.theta_outer - b.theta_outer).abs() < 1e-6 * a.theta_outer);
        assert!((a.logl - b.logl).abs() < 1e-6 * a.logl.abs().max(1.0));
    }
}
