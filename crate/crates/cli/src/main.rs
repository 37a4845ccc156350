mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigError;

/// Bayesian quantile VARs with constant, SV and GARCH scale dynamics.
#[derive(Debug, Parser)]
#[command(name = "qvar", version)]
struct Cli {
    /// TOML configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Size of the worker pool; overrides run.threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a panel from the study DGP.
    Simulate,
    /// Fit each configured regime on the full data set.
    Estimate,
    /// Rolling-window quantile forecasts; resumes from an existing checkpoint.
    Backtest {
        /// Stop after this many newly completed origins, keeping the checkpoint.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Quantile scores, DM tests, combination weights and combined forecasts.
    Evaluate {
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        realized: Option<PathBuf>,
    },
    /// Descriptive statistics of the data and, if enabled, the simulation study.
    Report,
}

/// Everything that can end a run, mapped to the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(String),
    Lib(qvar::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<qvar::Error> for Failure {
    fn from(e: qvar::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    pub fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        Failure::Io(format!("{context}: {e}"))
    }

    fn exit_code(&self) -> u8 {
        use qvar::Error as E;
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 4,
            Failure::Lib(e) if e.is_numerical() => 3,
            Failure::Lib(e) if e.is_io() => 4,
            Failure::Lib(E::Data { .. } | E::NonFinite { .. } | E::Misaligned(_)) => 4,
            Failure::Lib(E::GigRegion { .. }) => 3,
            Failure::Lib(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.run.threads = t;
    }
    if cfg.run.threads > 0 {
        // Fails only if the pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build_global();
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::io(cli.out.display(), e))?;
    let ctx = commands::Context { cfg, out: cli.out };
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Estimate => commands::estimate(&ctx),
        Command::Backtest { stop_after } => commands::backtest(&ctx, stop_after),
        Command::Evaluate { records, realized } => commands::evaluate(&ctx, records, realized),
        Command::Report => commands::report(&ctx),
    }?;
    output::write_manifest(&ctx.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qvar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
