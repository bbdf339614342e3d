//! Reference computations for testing `vdgp`. Everything here is written
//! from the model definition with nalgebra and does not call the library's
//! linear algebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::ContinuousCDF;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    SqExp,
    Matern52,
}

impl Family {
    pub fn lib(self) -> vdgp::KernelFamily {
        match self {
            Family::SqExp => vdgp::KernelFamily::SqExp,
            Family::Matern52 => vdgp::KernelFamily::Matern52,
        }
    }
}

pub fn k(family: Family, a: &[f64], b: &[f64], theta: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    match family {
        Family::SqExp => (-d2 / theta).exp(),
        Family::Matern52 => {
            let r = (5.0 * d2 / theta).sqrt();
            (1.0 + r + r * r / 3.0) * (-r).exp()
        }
    }
}

/// `tau2 * (K(a, b) + g * I)`; the nugget only when `same`.
pub fn cov(family: Family, a: &[Vec<f64>], b: &[Vec<f64>], theta: f64, tau2: f64, g: f64, same: bool) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        let nug = if same && i == j { g } else { 0.0 };
        tau2 * (k(family, &a[i], &b[j], theta) + nug)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn points(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

pub fn design(rows: &[Vec<f64>]) -> vdgp::DesignMatrix {
    vdgp::DesignMatrix::from_rows(rows).unwrap()
}

/// Gaussian log density without the `-(n/2) log 2 pi` term.
pub fn loglik(sigma: &DMatrix<f64>, y: &[f64]) -> f64 {
    let chol = sigma.clone().cholesky().expect("oracle covariance is positive definite");
    let l = chol.l();
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let alpha = chol.solve(&DVector::from_column_slice(y));
    let quad: f64 = y.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
    -0.5 * log_det - 0.5 * quad
}

/// Draw from `N(0, sigma)`.
pub fn mvn(rng: &mut impl Rng, sigma: &DMatrix<f64>) -> Vec<f64> {
    let l = sigma.clone().cholesky().unwrap().l();
    let z = DVector::from_fn(sigma.nrows(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    (l * z).iter().copied().collect()
}

/// Posterior predictive mean and covariance of a GP at `xp`.
pub fn gp_predict(
    family: Family,
    x: &[Vec<f64>],
    y: &[f64],
    xp: &[Vec<f64>],
    theta: f64,
    tau2: f64,
    g: f64,
) -> (Vec<f64>, DMatrix<f64>) {
    let kxx = cov(family, x, x, theta, tau2, g, true);
    let kpx = cov(family, xp, x, theta, tau2, g, false);
    let kpp = cov(family, xp, xp, theta, tau2, g, true);
    let chol = kxx.cholesky().unwrap();
    let mean = &kpx * chol.solve(&DVector::from_column_slice(y));
    let cov = kpp - &kpx * chol.solve(&kpx.transpose());
    (mean.iter().copied().collect(), cov)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Log density of the ordered product of univariate conditionals
/// `y_i | y_c(i)`, each computed by a dense solve on its own block.
#[allow(clippy::too_many_arguments)]
pub fn conditionals_loglik(
    family: Family,
    x: &[Vec<f64>],
    y: &[f64],
    order: &[usize],
    sets: &[Vec<usize>],
    theta: f64,
    tau2: f64,
    g: f64,
) -> f64 {
    let mut total = 0.0;
    for (pos, set) in sets.iter().enumerate() {
        let i = order[pos];
        let c: Vec<Vec<f64>> = set.iter().map(|&p| x[order[p]].clone()).collect();
        let yc: Vec<f64> = set.iter().map(|&p| y[order[p]]).collect();
        let xi = vec![x[i].clone()];
        let (mean, var) = if c.is_empty() {
            (0.0, tau2 * (1.0 + g))
        } else {
            let kcc = cov(family, &c, &c, theta, tau2, g, true);
            let kic = cov(family, &xi, &c, theta, tau2, g, false);
            let w = kcc.cholesky().unwrap().solve(&kic.transpose());
            let mean = (w.transpose() * DVector::from_column_slice(&yc))[0];
            (mean, tau2 * (1.0 + g) - (kic * w)[0])
        };
        total += -0.5 * var.ln() - 0.5 * (y[i] - mean).powi(2) / var;
    }
    total
}

pub fn rows(x: &vdgp::DesignMatrix) -> Vec<Vec<f64>> {
    (0..x.n()).map(|i| x.row(i).to_vec()).collect()
}

/// Per-sample outer moments from the dense formulas, on standardized data,
/// mapping the test inputs through each latent node by its conditional mean.
pub fn dense_sample_moments(t: &vdgp::DgpTrace, s: usize, xtest: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let sample = &t.samples[s];
    let mut train = rows(&t.design().unwrap());
    let st = &t.standardization;
    let mut test = rows(&st.scale_x(&design(xtest)).unwrap());
    for (l, layer) in sample.latent.iter().enumerate() {
        let w = rows(&sample.layer(l, t.n).unwrap());
        let mut mapped = vec![Vec::new(); test.len()];
        for (k, &theta) in layer.thetas.iter().enumerate() {
            let wk: Vec<f64> = w.iter().map(|r| r[k]).collect();
            let (mu, _) = gp_predict(Family::Matern52, &train, &wk, &test, theta, 1.0, 0.0);
            for (i, v) in mu.into_iter().enumerate() {
                mapped[i].push(v);
            }
        }
        train = w;
        test = mapped;
    }
    gp_predict(Family::Matern52, &train, &t.y, &test, sample.theta_outer, sample.tau2, sample.g)
}

/// Largest standardized errors of an ESS chain on `f ~ N(0, S)`,
/// `y | f ~ N(f, s2 I)` against the analytic posterior, for the mean and
/// the variance of every component. Standard errors come from batch means.
pub fn ess_conjugate(seed: u64, draws: usize, burn: usize) -> (f64, f64) {
    let n = 5;
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / 4.0]).collect();
    let prior = cov(Family::SqExp, &x, &x, 0.3, 1.0, 1e-6, true);
    let s2 = 0.25;
    let y = [0.8, -0.2, 0.5, 1.4, -0.9];
    let post_cov = (prior.clone().try_inverse().unwrap() + DMatrix::identity(n, n) / s2).try_inverse().unwrap();
    let post_mean = &post_cov * DVector::from_column_slice(&y) / s2;
    let ll = |f: &[f64]| -0.5 * f.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / s2;

    let mut r = rng(seed);
    let mut f = vec![0.0; n];
    let mut f_ll = ll(&f);
    let mut chain = Vec::with_capacity(draws);
    for it in 0..burn + draws {
        let nu = mvn(&mut r, &prior);
        let mv = vdgp::mcmc::elliptical_slice(&f, f_ll, &nu, &mut r, |p| Some((ll(p), ()))).unwrap();
        f = mv.state;
        f_ll = mv.loglik;
        if it >= burn {
            chain.push(f.clone());
        }
    }
    let batches = 50;
    let size = draws / batches;
    let batch_se = |stat: &dyn Fn(&[f64]) -> f64| -> (f64, f64) {
        let all = stat(&chain.iter().flatten().copied().collect::<Vec<_>>());
        let bm: Vec<f64> =
            chain.chunks(size).take(batches).map(|c| stat(&c.iter().flatten().copied().collect::<Vec<_>>())).collect();
        let mean_bm = bm.iter().sum::<f64>() / batches as f64;
        let var_bm = bm.iter().map(|b| (b - mean_bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (all, (var_bm / batches as f64).sqrt())
    };
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for i in 0..n {
        let mean_i = |flat: &[f64]| flat.iter().skip(i).step_by(n).sum::<f64>() / (flat.len() / n) as f64;
        let (m, se) = batch_se(&mean_i);
        worst_mean = worst_mean.max((m - post_mean[i]).abs() / se);
        let mu = post_mean[i];
        let var_i = |flat: &[f64]| {
            flat.iter().skip(i).step_by(n).map(|v| (v - mu).powi(2)).sum::<f64>() / (flat.len() / n) as f64
        };
        let (v, se) = batch_se(&var_i);
        worst_var = worst_var.max((v - post_cov[(i, i)]).abs() / se);
    }
    (worst_mean, worst_var)
}

/// Posterior-mode lengthscale of a one-layer fit to a draw from a GP with
/// lengthscale `theta`.
pub fn mh_recovery(seed: u64, theta: f64, n: usize, iterations: usize) -> f64 {
    let mut r = rng(seed);
    let x = points(&mut r, n, 2);
    let g = 1e-6;
    let y = mvn(&mut r, &cov(Family::Matern52, &x, &x, theta, 1.0, g, true));
    let config = vdgp::SamplerConfig {
        n_mcmc: iterations,
        burn_in: iterations / 4,
        thin: 1,
        seed,
        depth: 1,
        nugget: vdgp::mcmc::NuggetMode::Fixed { value: g },
        standardize: false,
        ..vdgp::SamplerConfig::default()
    };
    let t = vdgp::fit(&design(&x), &y, &config).unwrap();
    let prior = t.config.theta_prior;
    let post = |s: &vdgp::mcmc::Sample| s.logl + prior.log_density(s.theta_outer);
    t.samples.iter().max_by(|a, b| post(a).total_cmp(&post(b))).unwrap().theta_outer
}

/// `int (F(x) - 1{x >= y})^2 dx` by composite Simpson on each side of `y`.
pub fn crps_quadrature(y: f64, mu: f64, sd: f64) -> f64 {
    let dist = statrs::distribution::Normal::new(mu, sd).unwrap();
    let simpson = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let lo = (mu - 12.0 * sd).min(y);
    let hi = (mu + 12.0 * sd).max(y);
    simpson(lo, y, &|x| dist.cdf(x).powi(2)) + simpson(y, hi, &|x| (1.0 - dist.cdf(x)).powi(2))
}
