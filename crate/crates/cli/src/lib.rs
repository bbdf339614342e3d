//! Command-line workflows: `fit`, `predict` and `benchmark`.

pub mod config;
pub mod error;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use vdgp::mcmc::{continue_fit, fit, Backend, DgpTrace, NuggetMode};
use vdgp::predict::{predict_independent, predict_joint, PredictOptions};
use vdgp::{bench, io, KernelFamily};

pub use config::{RunConfig, Stage};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "vdgp", version, about = "Vecchia-approximated deep Gaussian process surrogates")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sampler on a training file and write a trace.
    Fit(FitArgs),
    /// Predict at test inputs from a trace.
    Predict(PredictArgs),
    /// Run a Monte Carlo benchmark and write score tables.
    Benchmark(BenchArgs),
}

/// Sampler overrides shared by `fit` and `benchmark`.
#[derive(Debug, Default, Args)]
pub struct SamplerFlags {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub kernel: Option<KernelFamily>,
    /// `false` runs on dense Cholesky factors.
    #[arg(long, action = ArgAction::Set)]
    pub vecchia: Option<bool>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Fix the nugget at this value.
    #[arg(long, conflicts_with = "sample_g")]
    pub fix_g: Option<f64>,
    /// Sample the nugget under its default prior.
    #[arg(long)]
    pub sample_g: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training data: input columns then the response, with a header row.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Trace file to write.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub re_approx: bool,
    #[command(flatten)]
    pub sampler: SamplerFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Test inputs with a header row.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Predictions file to write.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Covariance matrix file (joint mode).
    #[arg(long)]
    pub cov_out: Option<PathBuf>,
    /// `false` computes the joint covariance as well.
    #[arg(long, action = ArgAction::Set)]
    pub lite: Option<bool>,
    #[arg(long)]
    pub m_pred: Option<usize>,
    /// Joint mode without conditioning among test points.
    #[arg(long)]
    pub no_test_conditioning: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub m_pred: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerFlags,
}

fn apply_sampler_flags(c: &mut RunConfig, f: &SamplerFlags) {
    let s = &mut c.sampler;
    if let Some(v) = f.m {
        s.m = v;
    }
    if let Some(v) = f.depth {
        s.depth = v;
    }
    if let Some(v) = f.kernel {
        s.kernel = v;
    }
    if let Some(v) = f.vecchia {
        s.backend = if v { Backend::Vecchia } else { Backend::Dense };
    }
    if let Some(v) = f.iters {
        s.n_mcmc = v;
    }
    if let Some(v) = f.burn_in {
        s.burn_in = v;
    }
    if let Some(v) = f.thin {
        s.thin = v;
    }
    if let Some(v) = f.fix_g {
        s.nugget = NuggetMode::Fixed { value: v };
    }
    if f.sample_g {
        s.nugget = NuggetMode::sampled();
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::Config(format!("no {what} given (flag or [data] entry)")))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Resolve the configuration for `cli`: file, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.sampler.seed = s;
    }
    if cli.threads.is_some() {
        c.threads = cli.threads;
    }
    match &cli.command {
        Command::Fit(a) => {
            apply_sampler_flags(&mut c, &a.sampler);
            c.re_approx |= a.re_approx;
            if a.train.is_some() {
                c.data.train = a.train.clone();
            }
            if a.out.is_some() {
                c.data.trace = a.out.clone();
            }
        }
        Command::Predict(a) => {
            if a.trace.is_some() {
                c.data.trace = a.trace.clone();
            }
            if a.test.is_some() {
                c.data.test = a.test.clone();
            }
            if a.out.is_some() {
                c.data.predictions = a.out.clone();
            }
            if a.cov_out.is_some() {
                c.data.covariance = a.cov_out.clone();
            }
            if let Some(l) = a.lite {
                c.predict.lite = l;
            }
            if a.m_pred.is_some() {
                c.predict.m_pred = a.m_pred;
            }
            if a.no_test_conditioning {
                c.predict.test_conditioning = false;
            }
        }
        Command::Benchmark(a) => {
            apply_sampler_flags(&mut c, &a.sampler);
            if a.scores.is_some() {
                c.data.scores = a.scores.clone();
            }
            if a.summary.is_some() {
                c.data.summary = a.summary.clone();
            }
            if let Some(r) = a.reps {
                c.experiment.reps = r;
            }
            if a.m_pred.is_some() {
                c.experiment.m_pred = a.m_pred;
            }
        }
    }
    c.sampler.validate()?;
    Ok(c)
}

pub fn cmd_fit(c: &RunConfig) -> Result<DgpTrace, CliError> {
    let train = required(&c.data.train, "training file")?;
    let out = required(&c.data.trace, "trace output")?;
    let (x, y) = io::read_training(train)?;
    let mut trace = fit(&x, &y, &c.sampler)?;
    if c.re_approx {
        trace = continue_fit(&trace, c.sampler.n_mcmc - c.sampler.burn_in, true)?;
    }
    trace.write(out).map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
    let a = &trace.acceptance;
    println!("iterations: {}  retained: {}", trace.iterations, trace.samples.len());
    for (l, layer) in a.theta_latent.iter().enumerate() {
        let rates: Vec<String> = layer.iter().map(|k| format!("{:.3}", k.rate())).collect();
        println!("latent layer {} lengthscale acceptance: {}", l + 1, rates.join(" "));
    }
    println!("outer lengthscale acceptance: {:.3}", a.theta_outer.rate());
    if a.nugget.proposed > 0 {
        println!("nugget acceptance: {:.3}", a.nugget.rate());
    }
    if a.ess_moves > 0 {
        println!("slice evaluations per move: {:.2}", a.ess_cost());
    }
    println!("final profiled log-likelihood: {}", trace.last.logl);
    Ok(trace)
}

pub fn cmd_predict(c: &RunConfig) -> Result<vdgp::PredictionResult, CliError> {
    let trace_path = required(&c.data.trace, "trace file")?;
    let test = required(&c.data.test, "test file")?;
    let out = required(&c.data.predictions, "predictions output")?;
    let trace = DgpTrace::read(trace_path)?;
    let xtest = io::read_inputs(test, trace.d)?;
    let opts = PredictOptions {
        m_pred: c.predict.m_pred,
        mapping: c.predict.mapping,
        test_conditioning: c.predict.test_conditioning,
        keep_samples: false,
    };
    // The trace carries the fit's settings; echo those, not the defaults.
    let mut echoed = c.clone();
    echoed.sampler = trace.config.clone();
    let meta = echoed.echo(Stage::Predict)?;
    let result = if c.predict.lite {
        predict_independent(&trace, &xtest, &opts)?
    } else {
        let r = predict_joint(&trace, &xtest, &opts)?;
        let cov_path = match &c.data.covariance {
            Some(p) => p.clone(),
            None => with_suffix(out, "cov"),
        };
        let cov = r.joint_cov.as_ref().expect("joint prediction carries a covariance");
        io::write_matrix(create(&cov_path)?, &meta, cov)?;
        r
    };
    io::write_predictions(create(out)?, &meta, &result)?;
    Ok(result)
}

pub fn cmd_benchmark(c: &RunConfig) -> Result<bench::ScoreTable, CliError> {
    let scores = required(&c.data.scores, "scores output")?;
    let exp = c.experiment();
    exp.validate()?;
    let table = bench::run_experiment(&exp)?;
    let meta = c.echo(Stage::Benchmark)?;
    io::write_scores(create(scores)?, &meta, &table)?;
    let summary = match &c.data.summary {
        Some(p) => p.clone(),
        None => with_suffix(scores, "summary"),
    };
    io::write_summary(create(&summary)?, &meta, &table.summary())?;
    for f in &table.failures {
        eprintln!("warning: {} rep {} failed: {}", f.model, f.rep, f.message);
    }
    Ok(table)
}

/// `dir/name.ext` -> `dir/name.<suffix>.ext`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let c = resolve(&cli)?;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set thread count: {e}")))?;
    }
    match cli.command {
        Command::Fit(_) => cmd_fit(&c).map(|_| ()),
        Command::Predict(_) => cmd_predict(&c).map(|_| ()),
        Command::Benchmark(_) => cmd_benchmark(&c).map(|_| ()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(with_suffix(Path::new("a/b.csv"), "cov"), PathBuf::from("a/b.cov.csv"));
        assert_eq!(with_suffix(Path::new("scores"), "summary"), PathBuf::from("scores.summary"));
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::parse_from(["vdgp", "--seed", "7", "fit", "--m", "10", "--vecchia", "false", "--sample-g"]);
        let c = resolve(&cli).unwrap();
        assert_eq!(c.sampler.seed, 7);
        assert_eq!(c.sampler.m, 10);
        assert_eq!(c.sampler.backend, Backend::Dense);
        assert!(matches!(c.sampler.nugget, NuggetMode::Sampled { .. }));
    }

    #[test]
    fn invalid_sampler_is_a_config_error() {
        let cli = Cli::parse_from(["vdgp", "fit", "--iters", "10", "--burn-in", "10"]);
        assert_eq!(resolve(&cli).unwrap_err().exit_code(), 2);
    }
}
