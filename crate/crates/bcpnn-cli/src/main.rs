//! `bcpnn` — train, evaluate, and export unsupervised representation models.
//!
//! Subcommands:
//! - `train`  — unsupervised training (BCPNN or the RBM baseline) followed by
//!   a linear probe fit on the frozen representations; writes a run
//!   checkpoint, a JSON/CSV report, and the fully resolved config.
//! - `eval`   — recompute representations and probe accuracy from a
//!   checkpoint, no retraining.
//! - `export` — figure artifacts from a checkpoint: receptive-field images
//!   or a weight histogram CSV.
//! - `batch`  — several seeds of `train`, reported as mean +/- std.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.

// Strict-positivity guards are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{ModelKind, RunConfig, DATA_DIR_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<bcpnn::Error> for CliError {
    fn from(e: bcpnn::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "bcpnn",
    version,
    about = "Unsupervised representation learning with BCPNN, evaluated by a linear probe"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an unsupervised model plus its linear probe and write a run
    /// checkpoint.
    Train(TrainArgs),
    /// Recompute accuracies from an existing run checkpoint.
    Eval(EvalArgs),
    /// Export receptive fields or a weight histogram from a checkpoint.
    Export(ExportArgs),
    /// Run `train` across several seeds and report mean +/- std (sample
    /// standard deviation over the runs).
    Batch(BatchArgs),
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Config file (flat `key = value` lines); flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Dataset label recorded in reports (e.g. mnist, fashion-mnist).
    #[arg(long)]
    dataset: Option<String>,
    /// Directory holding the four standard IDX files (plain or .gz).
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Unsupervised epochs (BCPNN).
    #[arg(long)]
    n_epoch: Option<usize>,
    /// Hidden hypercolumns.
    #[arg(long)]
    n_hc: Option<usize>,
    /// Minicolumns per hidden hypercolumn.
    #[arg(long)]
    n_mc: Option<usize>,
    /// Integration time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Learning time constant.
    #[arg(long)]
    tau_p: Option<f64>,
    /// Initial input-to-hidden connection probability.
    #[arg(long)]
    p_ih: Option<f64>,
    /// Connection flips per hidden HC per epoch.
    #[arg(long)]
    n_flips: Option<usize>,
    /// Poisson mean for trace initialization.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    rbm_hidden: Option<usize>,
    #[arg(long)]
    rbm_alpha: Option<f64>,
    #[arg(long)]
    rbm_epochs: Option<usize>,
    #[arg(long)]
    rbm_batch: Option<usize>,
    #[arg(long)]
    probe_lr: Option<f64>,
    #[arg(long)]
    probe_beta1: Option<f64>,
    #[arg(long)]
    probe_beta2: Option<f64>,
    #[arg(long)]
    probe_epsilon: Option<f64>,
    #[arg(long)]
    probe_batch: Option<usize>,
    #[arg(long)]
    probe_epochs: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl TrainArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        macro_rules! overlay {
            ($($field:ident),* $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$field = Some(v.clone()); })*
            };
        }
        macro_rules! overlay_val {
            ($($field:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        overlay!(
            data_dir,
            train_images,
            train_labels,
            test_images,
            test_labels,
            out_dir
        );
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        overlay_val!(
            seed,
            n_epoch,
            n_hc,
            n_mc,
            dt,
            tau_p,
            p_ih,
            n_flips,
            mu,
            rbm_hidden,
            rbm_alpha,
            rbm_epochs,
            rbm_batch,
            probe_lr,
            probe_beta1,
            probe_beta2,
            probe_epsilon,
            probe_batch,
            probe_epochs,
            threads,
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Run checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Dataset label for the report; defaults to the checkpoint's.
    #[arg(long)]
    dataset: Option<String>,
    /// Also write report.json/report.csv here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// rf = receptive-field images, hist = weight histogram CSV.
    #[arg(long, value_enum)]
    kind: commands::ExportKind,
    #[arg(long)]
    out_dir: PathBuf,
    /// Hidden HCs to export (comma-separated); default: random pick.
    #[arg(long, value_delimiter = ',')]
    hcs: Option<Vec<usize>>,
    /// Minicolumns per HC to export; default: random pick.
    #[arg(long, value_delimiter = ',')]
    mcs: Option<Vec<usize>>,
    /// How many HCs to pick when --hcs is absent.
    #[arg(long, default_value_t = 5)]
    n_hcs: usize,
    /// How many MCs to pick when --mcs is absent.
    #[arg(long, default_value_t = 9)]
    n_mcs: usize,
    /// Seed for the random picks.
    #[arg(long, default_value_t = 0)]
    selection_seed: u64,
    /// Histogram bins.
    #[arg(long, default_value_t = 200)]
    bins: usize,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Number of seeds to run; seeds are seed, seed+1, ...
    #[arg(long, default_value_t = 10)]
    runs: usize,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Train(args) => {
            let cfg = args.resolve()?;
            commands::init_threads(cfg.threads);
            let report = commands::run_train(&cfg)?;
            println!("{}", report.to_json_line()?);
            Ok(())
        }
        Cmd::Eval(args) => {
            let report = commands::run_eval(&args)?;
            println!("{}", report.to_json_line()?);
            Ok(())
        }
        Cmd::Export(args) => {
            let written = commands::run_export(&args)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
        Cmd::Batch(args) => {
            let cfg = args.train.resolve()?;
            commands::init_threads(cfg.threads);
            let summary = commands::run_batch(&cfg, args.runs)?;
            println!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Runtime(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
