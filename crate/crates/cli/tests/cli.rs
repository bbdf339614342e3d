use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use vdgp::kernel::KernelSpec;
use vdgp::mcmc::DgpTrace;
use vdgp::{DenseGp, DesignMatrix, KernelFamily};

fn vdgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdgp")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vdgp(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn toy(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            let a = (i as f64 * 0.618_034).fract();
            let b = (i as f64 * 0.414_214 + 0.2).fract();
            [a, b, (4.0 * a).sin() * (3.0 * b).cos()]
        })
        .collect()
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) {
    let mut s = format!("{header}\n");
    for r in rows {
        let cells: Vec<String> = r.iter().map(f64::to_string).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

struct Files {
    dir: TempDir,
}

impl Files {
    fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_csv(&dir.path().join("train.csv"), "x1,x2,y", toy(n).into_iter().map(|r| r.to_vec()));
        let test = [[0.1, 0.2], [0.5, 0.5], [0.93, 0.07], [0.3, 0.8], [0.3, 0.81]];
        write_csv(&dir.path().join("test.csv"), "x1,x2", test.iter().map(|r| r.to_vec()));
        Files { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }
}

/// Data rows of a predictions file.
fn predictions(path: &str) -> Vec<(f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect()
}

fn matrix(path: &str) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fit_smoke_and_roundtrip() {
    let f = Files::new(10);
    let trace = f.path("trace.json");
    let stdout =
        ok(&["fit", "--train", &f.path("train.csv"), "--out", &trace, "--iters", "50", "--burn-in", "10", "--m", "5"]);
    assert!(stdout.contains("outer lengthscale acceptance"));
    assert!(stdout.contains("final profiled log-likelihood"));
    let t = DgpTrace::read(&trace).unwrap();
    assert_eq!(t.samples.len(), 20);
    let again = f.path("again.json");
    t.write(&again).unwrap();
    assert_eq!(std::fs::read(&trace).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn fit_is_reproducible_across_threads() {
    let f = Files::new(30);
    let mut files = Vec::new();
    for threads in ["1", "4", "8", "1"] {
        let out = f.path(&format!("t{threads}-{}.json", files.len()));
        ok(&[
            "--threads",
            threads,
            "--seed",
            "11",
            "fit",
            "--train",
            &f.path("train.csv"),
            "--out",
            &out,
            "--iters",
            "40",
            "--burn-in",
            "20",
        ]);
        files.push(std::fs::read(&out).unwrap());
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn dense_and_full_vecchia_paths_agree() {
    let n = 40;
    let f = Files::new(n);
    let common = ["--iters", "60", "--burn-in", "30", "--thin", "3", "--seed", "5"];
    let train = f.path("train.csv");
    let fit = |name: &str, extra: &[&str]| {
        let out = f.path(name);
        let mut args = vec!["fit", "--train", &train, "--out", &out];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        ok(&args);
        out
    };
    let dense = fit("dense.json", &["--vecchia", "false"]);
    let full = fit("full.json", &["--m", "39"]);
    let mut preds = Vec::new();
    for (trace, name) in [(&dense, "pd.csv"), (&full, "pv.csv")] {
        ok(&["predict", "--trace", trace, "--test", &f.path("test.csv"), "--out", &f.path(name), "--m-pred", "40"]);
        preds.push(predictions(&f.path(name)));
    }
    for (a, b) in preds[0].iter().zip(&preds[1]) {
        assert!((a.0 - b.0).abs() < 1e-6, "{a:?} vs {b:?}");
        assert!((a.1 - b.1).abs() < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn predict_modes() {
    let f = Files::new(25);
    let trace = f.path("trace.json");
    ok(&["fit", "--train", &f.path("train.csv"), "--out", &trace, "--iters", "30", "--burn-in", "10"]);
    write_csv(&PathBuf::from(f.path("one.csv")), "x1,x2", [vec![0.4, 0.4]]);
    ok(&["predict", "--trace", &trace, "--test", &f.path("one.csv"), "--out", &f.path("one_pred.csv")]);
    assert_eq!(predictions(&f.path("one_pred.csv")).len(), 1);

    ok(&["predict", "--trace", &trace, "--test", &f.path("test.csv"), "--out", &f.path("lite.csv")]);
    ok(&[
        "predict",
        "--trace",
        &trace,
        "--test",
        &f.path("test.csv"),
        "--out",
        &f.path("joint.csv"),
        "--lite",
        "false",
        "--no-test-conditioning",
        "--cov-out",
        &f.path("cov.csv"),
    ]);
    let lite = predictions(&f.path("lite.csv"));
    let cov = matrix(&f.path("cov.csv"));
    assert_eq!(cov.len(), lite.len());
    for (i, (_, v)) in lite.iter().enumerate() {
        assert_eq!(cov[i][i], *v);
    }
    assert_eq!(lite, predictions(&f.path("joint.csv")));
    let text = std::fs::read_to_string(f.path("lite.csv")).unwrap();
    assert!(text.starts_with("# vdgp "));
    assert!(text.contains("\nindex,mean,variance\n"));
}

#[test]
fn lite_one_layer_matches_dense_oracle() {
    let n = 30;
    let f = Files::new(n);
    let trace = f.path("gp.json");
    ok(&[
        "fit",
        "--train",
        &f.path("train.csv"),
        "--out",
        &trace,
        "--depth",
        "1",
        "--iters",
        "12",
        "--burn-in",
        "10",
        "--thin",
        "2",
    ]);
    ok(&["predict", "--trace", &trace, "--test", &f.path("test.csv"), "--out", &f.path("p.csv"), "--m-pred", "30"]);
    let t = DgpTrace::read(&trace).unwrap();
    assert_eq!(t.samples.len(), 1);
    let s = &t.samples[0];
    let st = &t.standardization;
    let spec = KernelSpec::new(KernelFamily::Matern52, s.theta_outer, s.tau2, s.g).unwrap();
    let gp = DenseGp::new(t.design().unwrap(), t.y.clone(), spec).unwrap();
    let test = vdgp::io::read_inputs(f.path("test.csv"), 2).unwrap();
    let (mu, var) = gp.predict_pointwise(&st.scale_x(&test).unwrap()).unwrap();
    let got = predictions(&f.path("p.csv"));
    for i in 0..mu.len() {
        assert!((got[i].0 - st.unscale_mean(mu[i])).abs() < 1e-6);
        assert!((got[i].1 - st.unscale_variance(var[i])).abs() < 1e-6);
    }
    let _: DesignMatrix = test;
}

#[test]
fn exit_codes() {
    let f = Files::new(10);
    let bad = f.path("bad.csv");
    std::fs::write(&bad, "x,y\n0.1,1\n0.2,two\n").unwrap();
    let out = vdgp(&["fit", "--train", &bad, "--out", &f.path("t.json"), "--iters", "5", "--burn-in", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    std::fs::write(&bad, "x,y\n0.1,1\n0.2,NaN\n").unwrap();
    let out = vdgp(&["fit", "--train", &bad, "--out", &f.path("t.json"), "--iters", "5", "--burn-in", "1"]);
    assert_eq!(out.status.code(), Some(3));

    let cfg = f.path("c.toml");
    std::fs::write(&cfg, "[sampler]\nwarp = 2\n").unwrap();
    let out = vdgp(&["--config", &cfg, "fit", "--train", &f.path("train.csv"), "--out", &f.path("t.json")]);
    assert_eq!(out.status.code(), Some(2));

    let out = vdgp(&["fit", "--train", &f.path("train.csv")]);
    assert_eq!(out.status.code(), Some(2));

    ok(&["fit", "--train", &f.path("train.csv"), "--out", &f.path("t.json"), "--iters", "5", "--burn-in", "1"]);
    write_csv(&PathBuf::from(f.path("wide.csv")), "a,b,c,d", [vec![0.1, 0.2, 0.3, 0.4]]);
    let out =
        vdgp(&["predict", "--trace", &f.path("t.json"), "--test", &f.path("wide.csv"), "--out", &f.path("p.csv")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn benchmark_outputs_are_reproducible() {
    let f = Files::new(5);
    let cfg = f.path("bench.toml");
    std::fs::write(
        &cfg,
        r#"
[sampler]
n_mcmc = 30
burn_in = 10
thin = 2
[experiment]
n_train = 12
n_test = 6
reps = 2
timings = false
models = [{ kind = "dense-gp" }, { kind = "vecchia-dgp", m = 5 }]
"#,
    )
    .unwrap();
    let mut outs = Vec::new();
    for (threads, tag) in [("1", "a"), ("4", "b")] {
        let scores = f.path(&format!("scores-{tag}.csv"));
        ok(&["--config", &cfg, "--threads", threads, "benchmark", "--scores", &scores]);
        let summary = f.path(&format!("scores-{tag}.summary.csv"));
        outs.push((std::fs::read_to_string(&scores).unwrap(), std::fs::read_to_string(&summary).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
    let rows: Vec<&str> = outs[0].0.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "model,rep,n,m,rmse,rmspe,crps,fit_s,pred_s");
    assert_eq!(rows.len(), 5);
    assert!(outs[0].0.contains("n_train = 12"));
}
