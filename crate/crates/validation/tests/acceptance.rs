//! Acceptance criteria. Each criterion prints one `PASS` or `FAIL` line;
//! the process fails if any criterion fails. Pass `AC-<k>` arguments to run
//! a subset.

use std::sync::Arc;
use std::time::Instant;

use vdgp_validation::{conditionals_loglik, cov, dense_sample_moments, design, points, rng, Family};
use rand::Rng;
use vdgp::bench::{
    crps_gaussian, lhs, median, rmse, rmspe, run_experiment, ExperimentConfig, ModelKind, ModelSpec, ScoreTable,
    TestFunction,
};
use vdgp::io::{write_predictions, write_scores};
use vdgp::kernel::KernelSpec;
use vdgp::mcmc::{NuggetMode, SamplerConfig};
use vdgp::vecchia::{build_u, nn_conditioning, random_ordering};
use vdgp::{fit, predict_independent, predict_joint, PredictOptions};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn family(i: usize) -> Family {
    if i.is_multiple_of(2) {
        Family::SqExp
    } else {
        Family::Matern52
    }
}

fn ac1() -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..20 {
        let mut r = rng(100 + case as u64);
        let n = r.random_range(20..=200);
        let d = r.random_range(1..=4);
        let theta = 10f64.powf(r.random_range(-2.0..0.0));
        let g = 10f64.powf(r.random_range(-6.0..-2.0));
        let tau2 = r.random_range(0.5..3.0);
        let fam = family(case);
        let x = points(&mut r, n, d);
        let sigma = cov(fam, &x, &x, theta, tau2, g, true);
        let y = vdgp_validation::mvn(&mut r, &sigma);
        let xd = design(&x);
        let plan = Arc::new(nn_conditioning(&xd, &random_ordering(n, case as u64).unwrap(), n - 1).unwrap());
        let u = build_u(&xd, &plan, &KernelSpec::new(fam.lib(), theta, tau2, g).unwrap()).unwrap();
        worst = worst.max(vdgp_validation::rel_err(u.loglik(&y).unwrap(), vdgp_validation::loglik(&sigma, &y)));
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && secs < 30.0, format!("max relative error {worst:.2e}, {secs:.1} s"))
}

fn ac2() -> Outcome {
    let mut worst = 0.0f64;
    for case in 0..50 {
        let mut r = rng(200 + case as u64);
        let m = [1, 5, 25][case % 3];
        let n = r.random_range(2..=80);
        let d = r.random_range(1..=3);
        let theta = 10f64.powf(r.random_range(-2.0..0.0));
        let g = 10f64.powf(r.random_range(-6.0..-1.0));
        let tau2 = r.random_range(0.5..3.0);
        let fam = family(case / 3);
        let x = points(&mut r, n, d);
        let y = vdgp_validation::mvn(&mut r, &cov(fam, &x, &x, theta, tau2, g, true));
        let xd = design(&x);
        let order = random_ordering(n, case as u64).unwrap();
        let plan = Arc::new(nn_conditioning(&xd, &order, m).unwrap());
        let u = build_u(&xd, &plan, &KernelSpec::new(fam.lib(), theta, tau2, g).unwrap()).unwrap();
        let sets: Vec<Vec<usize>> = plan.sets().map(<[usize]>::to_vec).collect();
        let oracle = conditionals_loglik(fam, &x, &y, order.as_slice(), &sets, theta, tau2, g);
        worst = worst.max((u.loglik(&y).unwrap() - oracle).abs() / oracle.abs().max(1.0));
    }
    outcome(worst < 1e-10, format!("max error {worst:.2e} over 50 cases"))
}

fn ac3() -> Outcome {
    let (n, np) = (50, 10);
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let x = points(&mut r, n, 2);
        let y: Vec<f64> = x.iter().map(|p| (4.0 * p[0]).sin() + (3.0 * p[1]).cos() * p[0]).collect();
        let config = SamplerConfig { n_mcmc: 20, burn_in: 19, thin: 1, depth: 1, seed, ..SamplerConfig::default() };
        let t = fit(&design(&x), &y, &config).unwrap();
        let xtest = points(&mut r, np, 2);
        let opts = PredictOptions { m_pred: Some(n + np), ..PredictOptions::default() };
        let got = predict_joint(&t, &design(&xtest), &opts).unwrap();
        let (mu, sigma) = dense_sample_moments(&t, 0, &xtest);
        let st = &t.standardization;
        let joint = got.joint_cov.unwrap();
        for i in 0..np {
            worst = worst.max((got.mean[i] - st.unscale_mean(mu[i])).abs());
            for j in 0..np {
                worst = worst.max((joint[(i, j)] - st.unscale_variance(sigma[(i, j)])).abs());
            }
        }
    }
    outcome(worst < 1e-6, format!("max moment error {worst:.2e} over 20 seeds"))
}

fn ac4() -> Outcome {
    let (mean_z, var_z) = vdgp_validation::ess_conjugate(400, 20_000, 1_000);
    let theta = 0.2;
    let modes: Vec<f64> = (0..20).map(|s| vdgp_validation::mh_recovery(400 + s, theta, 100, 1_000)).collect();
    let within = modes.iter().filter(|m| **m >= theta / 2.0 && **m <= theta * 2.0).count();
    let (lo, hi) = modes.iter().fold((f64::INFINITY, 0.0f64), |(a, b), m| (a.min(*m), b.max(*m)));
    outcome(
        mean_z < 3.0 && var_z < 3.0 && within == 20,
        format!(
            "ESS worst |z| mean {mean_z:.2}, variance {var_z:.2}; MH modes within factor 2 in {within}/20 (range {lo:.3}..{hi:.3})"
        ),
    )
}

fn medians(table: &ScoreTable, label: &str) -> (f64, f64, usize) {
    let rows = table.model(label);
    let rmse = median(&rows.iter().map(|r| r.rmse).collect::<Vec<_>>());
    let crps = median(&rows.iter().map(|r| r.crps).collect::<Vec<_>>());
    (rmse, crps, rows.len())
}

fn failures(table: &ScoreTable) -> String {
    if table.failures.is_empty() {
        String::new()
    } else {
        format!("; {} failed cells, first: {}", table.failures.len(), table.failures[0].message)
    }
}

fn ac5() -> Outcome {
    let config = ExperimentConfig {
        function: TestFunction::Schaffer2,
        n_train: 300,
        n_test: 500,
        reps: 5,
        models: vec![ModelSpec::new(ModelKind::VecchiaDgp), ModelSpec::new(ModelKind::VecchiaGp)],
        sampler: SamplerConfig { n_mcmc: 3000, burn_in: 1000, thin: 2, m: 25, ..SamplerConfig::default() },
        seed: 5,
        ..ExperimentConfig::default()
    };
    let started = Instant::now();
    let table = run_experiment(&config).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let (dr, dc, dn) = medians(&table, "vecchia-dgp");
    let (gr, gc, gn) = medians(&table, "vecchia-gp");
    outcome(
        dn == 5 && gn == 5 && dr < gr && dc < gc,
        format!(
            "median RMSE dgp {dr:.4} vs gp {gr:.4}, CRPS dgp {dc:.4} vs gp {gc:.4}, {secs:.0} s{}",
            failures(&table)
        ),
    )
}

fn quartiles(v: &[f64]) -> (f64, f64) {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (s.len() - 1) as f64;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    (q(0.25), q(0.75))
}

fn ac6() -> Outcome {
    let config = ExperimentConfig {
        function: TestFunction::Schaffer2,
        n_train: 100,
        n_test: 500,
        reps: 10,
        models: vec![ModelSpec::with_m(ModelKind::VecchiaDgp, 25), ModelSpec::new(ModelKind::FullDgp)],
        sampler: SamplerConfig { n_mcmc: 2000, burn_in: 1000, thin: 2, ..SamplerConfig::default() },
        seed: 6,
        ..ExperimentConfig::default()
    };
    let table = run_experiment(&config).unwrap();
    let vec: Vec<f64> = table.model("vecchia-dgp-m25").iter().map(|r| r.rmse).collect();
    let full: Vec<f64> = table.model("full-dgp").iter().map(|r| r.rmse).collect();
    let diffs: Vec<f64> = vec.iter().zip(&full).map(|(a, b)| a - b).collect();
    let diff = median(&diffs);
    let (q1, q3) = quartiles(&full);
    outcome(
        vec.len() == 10 && full.len() == 10 && diff.abs() <= q3 - q1,
        format!(
            "median paired RMSE difference {diff:.4}, full-DGP RMSE IQR {:.4} (medians {:.4} vs {:.4}){}",
            q3 - q1,
            median(&vec),
            median(&full),
            failures(&table)
        ),
    )
}

/// Seconds per iteration of a two-layer fit on `n` Schaffer points, from
/// the difference of two chain lengths so that setup cost cancels.
fn seconds_per_iteration(n: usize) -> f64 {
    let x = TestFunction::Schaffer2.to_domain(&lhs(n, 2, 7).unwrap()).unwrap();
    let y: Vec<f64> = (0..n).map(|i| vdgp::bench::schaffer2(x.row(i)).unwrap()).collect();
    let time = |iters: usize| {
        let config = SamplerConfig { n_mcmc: iters, burn_in: 1, thin: 1, m: 25, seed: 7, ..SamplerConfig::default() };
        let started = Instant::now();
        fit(&x, &y, &config).unwrap();
        started.elapsed().as_secs_f64()
    };
    let (short, long) = (10, 50);
    (time(long) - time(short)) / (long - short) as f64
}

fn ac7() -> Outcome {
    let small = seconds_per_iteration(1000) * 1000.0;
    let large = seconds_per_iteration(4000) * 1000.0;
    let ratio = large / small;
    outcome(
        ratio <= 5.0,
        format!("{small:.0} s per 1000 iterations at n=1000, {large:.0} s at n=4000, ratio {ratio:.2}"),
    )
}

fn ac8() -> Outcome {
    let ms = [5, 10, 25, 50];
    let config = ExperimentConfig {
        function: TestFunction::Schaffer2,
        n_train: 1000,
        n_test: 500,
        reps: 5,
        models: ms.iter().map(|&m| ModelSpec::with_m(ModelKind::VecchiaDgp, m)).collect(),
        sampler: SamplerConfig { n_mcmc: 300, burn_in: 150, thin: 3, ..SamplerConfig::default() },
        seed: 8,
        ..ExperimentConfig::default()
    };
    let table = run_experiment(&config).unwrap();
    let med: Vec<f64> = ms.iter().map(|m| medians(&table, &format!("vecchia-dgp-m{m}")).0).collect();
    let (m5, m25, m50) = (med[0], med[2], med[3]);
    outcome(
        table.failures.is_empty() && (m25 - m50).abs() <= 0.1 * m50 && m25 < m5 && m50 < m5,
        format!("median RMSE m=5 {m5:.4}, m=10 {:.4}, m=25 {m25:.4}, m=50 {m50:.4}{}", med[1], failures(&table)),
    )
}

fn ac9() -> Outcome {
    let mut r = rng(900);
    let mut worst_crps = 0.0f64;
    for _ in 0..100 {
        let mu = r.random_range(-2.0..2.0);
        let sd = r.random_range(0.05..2.0);
        let y = mu + r.random_range(-4.0..4.0) * sd;
        worst_crps = worst_crps.max((crps_gaussian(y, mu, sd) - vdgp_validation::crps_quadrature(y, mu, sd)).abs());
    }
    let mut worst_err = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(1..50);
        let mean: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let truth: Vec<f64> = (0..n).map(|_| r.random_range(0.5..5.0)).collect();
        let k = n as f64;
        let direct = (mean.iter().zip(&truth).map(|(m, y)| (y - m).powi(2)).sum::<f64>() / k).sqrt();
        let pct = (mean.iter().zip(&truth).map(|(m, y)| (100.0 * (y - m) / y).powi(2)).sum::<f64>() / k).sqrt();
        worst_err = worst_err.max((rmse(&mean, &truth).unwrap() - direct).abs() / direct.max(1.0));
        worst_err = worst_err.max((rmspe(&mean, &truth).unwrap() - pct).abs() / pct.max(1.0));
    }
    outcome(
        worst_crps < 1e-6 && worst_err < 1e-12,
        format!("CRPS vs quadrature {worst_crps:.2e}, rmse/rmspe {worst_err:.2e}"),
    )
}

fn ac10() -> Outcome {
    let config = ExperimentConfig {
        function: TestFunction::Gfunction { d: 2 },
        n_train: 2000,
        n_test: 500,
        noise_sd: 0.01,
        reps: 5,
        models: vec![ModelSpec::new(ModelKind::VecchiaDgp), ModelSpec::new(ModelKind::VecchiaGp)],
        sampler: SamplerConfig {
            n_mcmc: 300,
            burn_in: 150,
            thin: 3,
            nugget: NuggetMode::sampled(),
            ..SamplerConfig::default()
        },
        seed: 10,
        ..ExperimentConfig::default()
    };
    let table = run_experiment(&config).unwrap();
    let dgp = table.model("vecchia-dgp");
    let gp = table.model("vecchia-gp");
    let noise = median(&dgp.iter().map(|r| r.noise_variance).collect::<Vec<_>>());
    let wins = dgp.iter().filter(|d| gp.iter().any(|g| g.rep == d.rep && d.rmse < g.rmse)).count();
    let truth = 1e-4;
    outcome(
        dgp.len() == 5 && noise >= 0.5 * truth && noise <= 2.0 * truth && wins >= 3,
        format!(
            "median noise variance {noise:.3e} (true {truth:.0e}), DGP RMSE below GP in {wins}/5 reps{}",
            failures(&table)
        ),
    )
}

/// Serialized fit, predict and benchmark outputs under a pool of `threads`.
fn outputs(threads: usize) -> Vec<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut r = rng(1100);
        let x = points(&mut r, 60, 2);
        let y: Vec<f64> = x.iter().map(|p| (5.0 * p[0] * p[1]).sin()).collect();
        let config = SamplerConfig { n_mcmc: 60, burn_in: 30, thin: 3, m: 10, seed: 11, ..SamplerConfig::default() };
        let t = fit(&design(&x), &y, &config).unwrap();
        let xtest = design(&points(&mut r, 25, 2));
        let mut out = vec![t.to_json().unwrap().into_bytes()];
        for joint in [false, true] {
            let p = if joint {
                predict_joint(&t, &xtest, &PredictOptions::default())
            } else {
                predict_independent(&t, &xtest, &PredictOptions::default())
            }
            .unwrap();
            let mut buf = Vec::new();
            write_predictions(&mut buf, &[], &p).unwrap();
            if let Some(c) = &p.joint_cov {
                vdgp::io::write_matrix(&mut buf, &[], c).unwrap();
            }
            out.push(buf);
        }
        let bench = ExperimentConfig {
            n_train: 30,
            n_test: 20,
            reps: 3,
            models: vec![ModelSpec::with_m(ModelKind::VecchiaDgp, 8), ModelSpec::new(ModelKind::DenseGp)],
            sampler: SamplerConfig { n_mcmc: 40, burn_in: 20, thin: 2, ..SamplerConfig::default() },
            timings: false,
            ..ExperimentConfig::default()
        };
        let mut buf = Vec::new();
        write_scores(&mut buf, &[], &run_experiment(&bench).unwrap()).unwrap();
        out.push(buf);
        out
    })
}

fn ac11() -> Outcome {
    let reference = outputs(1);
    let runs = [1, 4, 8, 4];
    let same = runs.iter().filter(|&&k| outputs(k) == reference).count();
    outcome(same == runs.len(), format!("{same}/{} runs byte-identical across threads {{1, 4, 8}}", runs.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("AC-1", ac1),
        ("AC-2", ac2),
        ("AC-3", ac3),
        ("AC-4", ac4),
        ("AC-5", ac5),
        ("AC-6", ac6),
        ("AC-7", ac7),
        ("AC-8", ac8),
        ("AC-9", ac9),
        ("AC-10", ac10),
        ("AC-11", ac11),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC-")).collect();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == name) {
            continue;
        }
        let started = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{name} {status} {} [{:.1} s]", o.detail, started.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
