//! Command-line interface.
//!
//! Exit status is 0 on success, 1 for usage, input, configuration and file
//! errors and 2 for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimators::{cncml, condition_number, fml, rcml, smi, CovarianceEstimate, SampleSpectrum};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{fmt_float, run_experiment};
use crate::harness::metrics::{normalized_sinr, sinr_db};
use crate::hermit::{sample_covariance, TrainingMatrix};
use crate::likelihood::{log_lr, lr0_load, lr0_reference, lr0_store};
use crate::scenario::{cmatrix_load, matrix_load, steering_vector_with, AngleMode};
use crate::selection::{select_kmax, select_loading, select_rank, select_rank_sigma};

#[derive(Debug, Parser)]
#[command(name = "elcov", version, about = "Structured covariance estimation with expected-likelihood constraint selection")]
struct Cli {
    /// Output as key=value lines or as two-column CSV.
    #[arg(long, value_enum, global = true, default_value_t = Format::Kv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Kv,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the reference LR for (N, K) and optionally append it to a table.
    Lr0 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 20000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Apply one estimator to a sample covariance.
    Estimate {
        /// Sample covariance (CMAT).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        kmax: Option<f64>,
    },
    /// Select a constraint by expected likelihood.
    Select(SelectArgs),
    /// Run a Monte-Carlo experiment from a configuration file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Fail instead of computing missing reference LR values.
        #[arg(long)]
        no_autocompute: bool,
        /// Override the output directory of the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Normalized SINR of an estimate against a true covariance.
    Sinr {
        #[arg(long)]
        rhat: PathBuf,
        #[arg(long)]
        rtrue: PathBuf,
        /// Steering angle in degrees.
        #[arg(long, allow_hyphen_values = true)]
        angle: f64,
        #[arg(long, value_enum, default_value_t = AngleArg::Phase)]
        angle_mode: AngleArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Smi,
    Fml,
    Rcml,
    Cncml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rank,
    RankSigma,
    Kmax,
    Loading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AngleArg {
    Phase,
    Sine,
}

impl From<AngleArg> for AngleMode {
    fn from(a: AngleArg) -> Self {
        match a {
            AngleArg::Phase => AngleMode::Phase,
            AngleArg::Sine => AngleMode::ArraySine,
        }
    }
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Sample covariance (CMAT); needs --k.
    #[arg(long, conflicts_with = "training", required_unless_present = "training")]
    input: Option<PathBuf>,
    /// Training snapshots (CMAT, N×K); the sample covariance is formed from them.
    #[arg(long)]
    training: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Noise power for the rank and condition-number modes.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Starting rank of the rank searches.
    #[arg(long, default_value_t = 0)]
    rank_init: usize,
    /// Reference LR value.
    #[arg(long, conflicts_with = "lr0_table")]
    lr0: Option<f64>,
    /// Table to look the reference LR up in.
    #[arg(long)]
    lr0_table: Option<PathBuf>,
    /// Fail instead of computing a missing reference LR.
    #[arg(long)]
    no_autocompute: bool,
    #[arg(long, default_value_t = 20000)]
    lr0_trials: usize,
    #[arg(long, default_value_t = 0)]
    lr0_seed: u64,
    /// Steering angle in degrees for the NMF tie-break of rank-sigma.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    angle: f64,
    #[arg(long, value_enum, default_value_t = AngleArg::Phase)]
    angle_mode: AngleArg,
}

/// Ordered key/value output.
#[derive(Debug, Default)]
struct Report(Vec<(String, String)>);

impl Report {
    fn put(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn put_f(&mut self, key: &str, value: f64) {
        self.put(key, fmt_float(value));
    }

    fn put_vec(&mut self, key: &str, values: impl IntoIterator<Item = String>) {
        for (i, v) in values.into_iter().enumerate() {
            self.0.push((format!("{key}.{i}"), v));
        }
    }

    fn render(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Kv => {
                for (k, v) in &self.0 {
                    writeln!(out, "{k}={v}")?;
                }
                Ok(())
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["key", "value"])?;
                for (k, v) in &self.0 {
                    w.write_record([k, v])?;
                }
                w.flush()
            }
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Results go to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(report) => match report.render(cli.format, out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cmd: Command) -> Result<Report> {
    let mut rep = Report::default();
    match cmd {
        Command::Lr0 {
            n,
            k,
            trials,
            seed,
            table,
        } => {
            let r = lr0_reference(n, k, trials, seed)?;
            if let Some(path) = &table {
                lr0_store(&r, path)?;
            }
            rep.put("n", r.n);
            rep.put("k", r.k);
            rep.put("trials", r.trials);
            rep.put("seed", r.seed);
            rep.put_f("lr0", r.lr0);
            for (p, v) in &r.quantiles {
                rep.put_f(&format!("quantile.{p}"), *v);
            }
        }
        Command::Estimate {
            input,
            k,
            sigma2,
            method,
            rank,
            kmax,
        } => {
            let spectrum = SampleSpectrum::from_sample_covariance(&matrix_load(&input)?, k)?;
            let need_sigma2 = || sigma2.ok_or_else(|| Error::InvalidInput("--sigma2 is required for this method".into()));
            let est = match method {
                Method::Smi => smi(&spectrum),
                Method::Fml => fml(&spectrum.with_noise_power(need_sigma2()?)?),
                Method::Rcml => {
                    let r = rank.ok_or_else(|| Error::InvalidInput("--rank is required for rcml".into()))?;
                    rcml(&spectrum.with_noise_power(need_sigma2()?)?, r)?
                }
                Method::Cncml => {
                    let kmax = kmax.ok_or_else(|| Error::InvalidInput("--kmax is required for cncml".into()))?;
                    cncml(&spectrum.with_noise_power(need_sigma2()?)?, kmax)?
                }
            };
            report_estimate(&mut rep, &est, &spectrum)?;
        }
        Command::Select(args) => select(&mut rep, args)?,
        Command::Simulate {
            config,
            no_autocompute,
            output,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if no_autocompute {
                cfg.autocompute_lr0 = false;
            }
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let out = run_experiment(&cfg)?;
            rep.put("records", out.records.len());
            rep.put("failures", out.records.iter().filter(|r| r.sinr_db.is_none()).count());
            rep.put("trials_csv", out.trials_path.display());
            rep.put("summary_csv", out.summary_path.display());
            for (k, lr0) in &out.lr0 {
                rep.put_f(&format!("lr0.{k}"), *lr0);
            }
        }
        Command::Sinr {
            rhat,
            rtrue,
            angle,
            angle_mode,
        } => {
            let r_hat = matrix_load(&rhat)?;
            let r_true = matrix_load(&rtrue)?;
            if r_hat.n() != r_true.n() {
                return Err(Error::InvalidInput(format!(
                    "dimension mismatch: {} vs {}",
                    r_hat.n(),
                    r_true.n()
                )));
            }
            let s = steering_vector_with(r_hat.n(), angle, angle_mode.into());
            let eta = normalized_sinr(&r_hat, &r_true, &s)?;
            rep.put_f("eta", eta);
            rep.put_f("sinr_db", sinr_db(eta));
        }
    }
    Ok(rep)
}

fn report_estimate(rep: &mut Report, est: &CovarianceEstimate, spectrum: &SampleSpectrum) -> Result<()> {
    rep.put("method", est.kind);
    let c = &est.constraints;
    if let Some(r) = c.rank {
        rep.put("rank", r);
    }
    if let Some(s) = c.sigma2 {
        rep.put_f("sigma2", s);
    }
    if let Some(k) = c.kmax {
        rep.put_f("kmax", k);
    }
    if let Some(b) = c.loading {
        rep.put_f("loading", b);
    }
    let l = log_lr(&est.lambdas, spectrum.eigenvalues())?;
    rep.put_f("lr", l.exp());
    rep.put_f("log_lr", l);
    if let Ok(cn) = condition_number(est) {
        rep.put_f("condition_number", cn);
    }
    rep.put_vec("eigenvalues", est.lambdas.iter().map(|&v| fmt_float(v)));
    Ok(())
}

fn load_spectrum(args: &SelectArgs) -> Result<(SampleSpectrum, Option<TrainingMatrix>)> {
    if let Some(path) = &args.training {
        let z = TrainingMatrix::new(cmatrix_load(path)?)?;
        if let Some(k) = args.k {
            if k != z.k() {
                return Err(Error::InvalidInput(format!("--k {k} does not match {} training columns", z.k())));
            }
        }
        let spectrum = SampleSpectrum::from_sample_covariance(&sample_covariance(&z), z.k())?;
        return Ok((spectrum, Some(z)));
    }
    let path = args.input.as_deref().expect("clap requires --input or --training");
    let k = args
        .k
        .ok_or_else(|| Error::InvalidInput("--k is required with --input".into()))?;
    Ok((SampleSpectrum::from_sample_covariance(&matrix_load(path)?, k)?, None))
}

fn resolve_select_lr0(args: &SelectArgs, n: usize, k: usize) -> Result<f64> {
    if let Some(v) = args.lr0 {
        return Ok(v);
    }
    if let Some(path) = &args.lr0_table {
        if let Some(r) = lr0_load(n, k, path)? {
            return Ok(r.lr0);
        }
    }
    if args.no_autocompute {
        return Err(Error::Config(format!("no reference LR for N = {n}, K = {k}")));
    }
    let r = lr0_reference(n, k, args.lr0_trials, args.lr0_seed)?;
    if let Some(path) = &args.lr0_table {
        lr0_store(&r, path)?;
    }
    Ok(r.lr0)
}

fn select(rep: &mut Report, args: SelectArgs) -> Result<()> {
    let (spectrum, training) = load_spectrum(&args)?;
    let lr0 = resolve_select_lr0(&args, spectrum.n(), spectrum.k())?;
    let need_sigma2 = || {
        args.sigma2
            .ok_or_else(|| Error::InvalidInput("--sigma2 is required for this mode".into()))
    };
    rep.put_f("lr0", lr0);
    match args.mode {
        Mode::Rank => {
            let sel = select_rank(&spectrum.with_noise_power(need_sigma2()?)?, args.rank_init, lr0)?;
            rep.put("r_hat", sel.r_hat);
            rep.put_vec("trajectory.rank", sel.visited.iter().map(|(r, _)| r.to_string()));
            rep.put_vec("trajectory.lr", sel.visited.iter().map(|(_, lr)| fmt_float(*lr)));
        }
        Mode::RankSigma => {
            let z = training.ok_or_else(|| Error::InvalidInput("rank-sigma needs --training".into()))?;
            let s = steering_vector_with(spectrum.n(), args.angle, args.angle_mode.into());
            let sel = select_rank_sigma(&spectrum, args.rank_init, lr0, &z, &s)?;
            rep.put("r_hat", sel.r_hat);
            rep.put_f("sigma2_hat", sel.sigma2_hat);
            rep.put("chosen", sel.chosen_from);
            rep.put("noise_rank", sel.noise_rank);
            rep.put("iterations", sel.iterations);
            rep.put_vec("trajectory.rank", sel.trajectory.iter().map(|r| r.to_string()));
            for (tag, s2, nmf) in &sel.candidates {
                rep.put_f(&format!("candidate.{tag}.sigma2"), *s2);
                rep.put_f(&format!("candidate.{tag}.nmf"), *nmf);
            }
        }
        Mode::Kmax => {
            let sel = select_kmax(&spectrum.with_noise_power(need_sigma2()?)?, lr0)?;
            rep.put_f("kmax_hat", sel.kmax_hat);
            rep.put("inactive", sel.inactive);
            rep.put_f("final_step", sel.final_step);
            rep.put_vec("trajectory.kmax", sel.visited.iter().map(|(k, _)| fmt_float(*k)));
            rep.put_vec("trajectory.lr", sel.visited.iter().map(|(_, lr)| fmt_float(*lr)));
        }
        Mode::Loading => {
            let sel = select_loading(&spectrum, lr0)?;
            rep.put_f("beta", sel.beta);
            rep.put_f("lr", sel.lr);
            rep.put("iterations", sel.iterations);
        }
    }
    Ok(())
}

