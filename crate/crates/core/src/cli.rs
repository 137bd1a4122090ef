//! The `rasch` command line: simulate, estimate, infer, experiment, lsat.
//!
//! Exit codes are 0 on success, 2 for usage errors and 3 for data errors.
//! Failures print one JSON object on a single stderr line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, ItemEstimate, Method};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::inference::{confidence_intervals, plugin_covariance, CovarianceOptions};
use crate::lsat;
use crate::model::{sample_ground_truth, sample_responses, ParamSpec, ResponseData, SamplingScheme};
use crate::rng::{stream_rng, Stream};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rasch", version, about = "Random-pairing MLE for Rasch item parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw parameters and responses; write the responses CSV and a ground-truth JSON.
    Simulate(SimulateArgs),
    /// Estimate item parameters from a responses CSV.
    Estimate(EstimateArgs),
    /// Estimate and build plug-in confidence intervals.
    Infer(InferArgs),
    /// Run a Monte Carlo experiment described by a JSON config.
    Experiment(ExperimentArgs),
    /// Export or subsample the bundled LSAT corpus.
    Lsat(LsatArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Bernoulli,
    UniformMp,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub p: f64,
    /// normal | zeros | uniform:<log kappa> | explicit:<v1>,<v2>,...
    #[arg(long, default_value = "normal")]
    pub theta_spec: String,
    #[arg(long, default_value = "normal")]
    pub zeta_spec: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "bernoulli")]
    pub mode: Mode,
    /// Responses CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON; defaults to `<out>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataSource {
    /// Responses CSV (`user_id,item_id,response`).
    #[arg(long, required_unless_present = "lsat", conflicts_with = "lsat")]
    pub input: Option<PathBuf>,
    /// Use the bundled LSAT corpus.
    #[arg(long)]
    pub lsat: bool,
    /// Number of users, when the CSV does not mention every user.
    #[arg(long, requires = "n_items")]
    pub n_users: Option<usize>,
    /// Number of items, when the CSV does not mention every item.
    #[arg(long, requires = "n_users")]
    pub n_items: Option<usize>,
}

impl DataSource {
    fn load(&self) -> Result<ResponseData> {
        if self.lsat {
            return Ok(lsat::corpus());
        }
        let path = self.input.as_ref().expect("clap enforces --input or --lsat");
        let dims = self.n_users.zip(self.n_items);
        ResponseData::read_csv(BufReader::new(File::open(path)?), dims)
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataSource,
    /// rp | mrp | wp | pmle
    #[arg(long)]
    pub method: String,
    /// Number of random pairings averaged by mrp.
    #[arg(long)]
    pub n_split: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include every split's estimate (mrp).
    #[arg(long)]
    pub keep_splits: bool,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataSource,
    /// mrp | rp | wp
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub n_split: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Divide alpha by the number of items.
    #[arg(long)]
    pub bonferroni: bool,
    /// Mix in the within-split gradient covariance for finite n_split.
    #[arg(long)]
    pub finite_split: bool,
    /// JSON report; stdout when absent.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// CSV report (`item,theta_hat,ci_lower,ci_upper`).
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; overrides the config, stdout when neither is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed_base: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LsatArgs {
    /// Output CSV (or JSON with --top1-trials); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep N random users and M random items.
    #[arg(long, num_args = 2, value_names = ["N", "M"])]
    pub subsample: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repeat the subsample this many times and report top-1 recovery of mrp and pmle.
    #[arg(long, requires = "subsample")]
    pub top1_trials: Option<usize>,
    /// Splits for mrp in the top-1 comparison.
    #[arg(long, default_value_t = 20)]
    pub n_split: usize,
    /// Print the corpus SHA-256 and exit.
    #[arg(long)]
    pub checksum: bool,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut w = output(path)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn estimator_config(method: Method, n_split: Option<usize>, seed: u64) -> Result<EstimatorConfig> {
    let n_split = match (method, n_split) {
        (Method::Mrp, None) => return Err(Error::InvalidArgument("--n-split is required for mrp".into())),
        (Method::Mrp, Some(k)) => k,
        (_, _) => 1,
    };
    Ok(EstimatorConfig::new(method).seed(seed).n_split(n_split))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let theta_spec: ParamSpec = a.theta_spec.parse()?;
    let zeta_spec: ParamSpec = a.zeta_spec.parse()?;
    let scheme = match a.mode {
        Mode::Bernoulli => SamplingScheme::Bernoulli { p: a.p },
        Mode::UniformMp => SamplingScheme::uniform_from_p(a.m, a.p)?,
    };
    let gt = sample_ground_truth(a.n, a.m, &theta_spec, &zeta_spec, a.seed)?;
    let data = sample_responses(&gt, scheme, a.seed)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    data.write_csv(&mut w)?;
    w.flush()?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".truth.json");
        PathBuf::from(s)
    });
    let sidecar = json!({
        "seed": a.seed,
        "n": a.n,
        "m": a.m,
        "p": a.p,
        "mode": match a.mode { Mode::Bernoulli => "bernoulli", Mode::UniformMp => "uniform-mp" },
        "theta_spec": a.theta_spec,
        "zeta_spec": a.zeta_spec,
        "theta": gt.theta(),
        "zeta": gt.zeta(),
    });
    write_text(Some(&truth_path), &serde_json::to_string(&sidecar)?)
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    let data = a.data.load()?;
    let cfg = estimator_config(method, a.n_split, a.seed)?.keep_splits(a.keep_splits);
    let est = estimate(&data, &cfg)?;
    write_text(a.out.as_deref(), &est.to_json()?)
}

fn cmd_infer(a: &InferArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    if method == Method::Pmle {
        return Err(Error::InvalidArgument("infer supports mrp, rp and wp".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("--alpha {} is not in (0, 1)", a.alpha)));
    }
    let data = a.data.load()?;
    let est: ItemEstimate = estimate(&data, &estimator_config(method, a.n_split, a.seed)?)?;
    let cov = plugin_covariance(&data, &est, CovarianceOptions { finite_split_mixture: a.finite_split })?;
    let report = confidence_intervals(&est, &cov, a.alpha, a.bonferroni)?;
    if let Some(path) = &a.out_csv {
        let mut w = BufWriter::new(File::create(path)?);
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    if a.out_json.is_some() || a.out_csv.is_none() {
        write_text(a.out_json.as_deref(), &report.to_json()?)?;
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed_base {
        cfg.seed_base = s;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if a.out.is_some() {
        cfg.output = a.out.clone();
    }
    let result = run_experiment(&cfg)?;
    let mut w = output(cfg.output.as_deref())?;
    result.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_lsat(a: &LsatArgs) -> Result<()> {
    lsat::verify_corpus()?;
    if a.checksum {
        return write_text(a.out.as_deref(), lsat::CSV_SHA256);
    }
    let (n, m) = match a.subsample.as_deref() {
        Some(&[n, m]) => (n, m),
        Some(_) => unreachable!("clap takes exactly two values"),
        None => {
            let mut w = output(a.out.as_deref())?;
            w.write_all(&lsat::corpus_csv())?;
            return Ok(w.flush()?);
        }
    };
    if let Some(trials) = a.top1_trials {
        let rec = lsat::top1_recovery(n, m, trials, a.n_split, a.seed)?;
        return write_text(a.out.as_deref(), &serde_json::to_string(&rec)?);
    }
    let sub = lsat::subsample(&lsat::corpus(), n, m, &mut stream_rng(a.seed, Stream::Subsample))?;
    let mut w = output(a.out.as_deref())?;
    sub.data.write_csv(&mut w)?;
    Ok(w.flush()?)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Lsat(a) => cmd_lsat(a),
    }
}

/// The single-line JSON written to stderr for a failed command.
pub fn error_json(e: &Error) -> String {
    let mut obj = json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    if let Some(c) = e.components() {
        obj["components"] = json!(c);
    }
    if let Error::SplitFailed { index, .. } = e {
        obj["split"] = json!(index);
    }
    if let Error::Parse { line, .. } = e {
        obj["line"] = json!(line);
    }
    obj.to_string()
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first, "exit_code": EXIT_USAGE }));
            return EXIT_USAGE;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
