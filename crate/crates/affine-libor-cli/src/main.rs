//! `aflibor`: batch front end for curve construction, model fitting,
//! pricing, Monte Carlo validation, calibration and correlation reports.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] affine_libor::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}, column {column}: {message}", path.display())]
    Json { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn json(path: &std::path::Path, e: &serde_json::Error) -> Self {
        CliError::Json { path: path.to_path_buf(), line: e.line(), column: e.column(), message: e.to_string() }
    }

    /// 1 for numerical failures, 2 for input and I/O problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) if e.is_numerical() => 1,
            CliError::Numerical(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "aflibor", version, about = "Multiple-curve affine LIBOR model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the Monte Carlo and sampling seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build the initial curves and write `curves.json`.
    Curves,
    /// Fit the model and write `model.json`.
    Build,
    /// Price the configured instruments into `prices.json`.
    Price,
    /// Monte Carlo estimates into `mc.json`.
    Mc,
    /// Calibrate to a caplet surface.
    Calibrate,
    /// Correlation matrix into `correlations.csv`.
    Correlations,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    let out = &cli.out;
    match cli.command {
        Command::Curves => commands::curves(&cfg, out),
        Command::Build => commands::build(&cfg, out),
        Command::Price => commands::price(&cfg, out),
        Command::Mc => commands::mc(&cfg, out),
        Command::Calibrate => commands::calibrate(&cfg, out),
        Command::Correlations => commands::correlations(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
