//! `backflow`: backflow suprema, parameter scans and wavepacket verification.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use backflow_core::Error;
use clap::{Args, Parser, Subcommand};

use config::{CommandKind, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or unusable output location (exit 2).
    Config(String),
    /// Solver, assembly or oracle failure (exit 3).
    Numerical(String),
    /// A verification check failed (exit 1).
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Verify(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::AssemblyInconsistency { .. }
            | Error::SolverFailure { .. }
            | Error::WindowTooNarrow { .. }
            | Error::Leakage { .. }
            | Error::IncompatibleOperands(_) => Self::Numerical(msg),
            _ => Self::Config(msg),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "backflow", version, about = "Quantum backflow suprema for free particles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extrapolated supremum for a straight boundary (or the canonical kernel).
    BmLambda(RunArgs),
    /// Supremum over the Gaussian-bump family, with the linear prediction.
    MuScan(RunArgs),
    /// Rebuild the optimal state and check it by direct propagation.
    Verify(RunArgs),
    /// Boundary curves, one CSV per epsilon.
    BoundaryDump(RunArgs),
    /// Kernel values on one grid.
    KernelDump(RunArgs),
}

/// Options shared by all commands. Each one overrides the key of the same
/// name in the config file.
#[derive(Args, Default)]
struct RunArgs {
    /// Config file with [grid], [scan] and [output] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the planned matrix sizes and exit.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    threads: Option<String>,
    /// Comma-separated box lengths L.
    #[arg(long, allow_hyphen_values = true)]
    lengths: Option<String>,
    /// Comma-separated interval counts N.
    #[arg(long)]
    intervals: Option<String>,
    /// Box length for single-grid commands.
    #[arg(long)]
    length: Option<String>,
    /// Interval count for single-grid commands.
    #[arg(long)]
    points: Option<String>,
    /// Gauss-Legendre nodes for the series kernels.
    #[arg(long)]
    quadrature: Option<String>,
    #[arg(long)]
    series_order: Option<String>,
    /// straight, bump or bm.
    #[arg(long)]
    shape: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    slope: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    /// Comma-separated epsilon values; replaces the range.
    #[arg(long, allow_hyphen_values = true)]
    epsilons: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon_max: Option<String>,
    #[arg(long)]
    epsilon_step: Option<String>,
    /// Transfer window for verify: 4 or 0.
    #[arg(long)]
    duration: Option<String>,
    #[arg(long)]
    samples_per_cell: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p_max: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Output directory.
    #[arg(long)]
    dir: Option<String>,
    #[arg(long)]
    svg: Option<String>,
    /// Enable the on-disk matrix cache.
    #[arg(long)]
    cache: Option<String>,
    #[arg(long)]
    cache_dir: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("threads", &self.threads),
            ("lengths", &self.lengths),
            ("intervals", &self.intervals),
            ("length", &self.length),
            ("points", &self.points),
            ("quadrature", &self.quadrature),
            ("series_order", &self.series_order),
            ("shape", &self.shape),
            ("slope", &self.slope),
            ("epsilon", &self.epsilon),
            ("epsilons", &self.epsilons),
            ("epsilon_min", &self.epsilon_min),
            ("epsilon_max", &self.epsilon_max),
            ("epsilon_step", &self.epsilon_step),
            ("duration", &self.duration),
            ("samples_per_cell", &self.samples_per_cell),
            ("p_min", &self.p_min),
            ("p_max", &self.p_max),
            ("samples", &self.samples),
            ("dir", &self.dir),
            ("svg", &self.svg),
            ("cache", &self.cache),
            ("cache_dir", &self.cache_dir),
        ]
    }

    fn settings(&self, kind: CommandKind) -> Result<Settings, CliError> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                config::parse_file(&text, path)?
            }
            None => BTreeMap::new(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                map.insert(key.to_string(), v.trim().to_string());
            }
        }
        Settings::resolve(kind, &map)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (kind, args) = match &cli.command {
        Command::BmLambda(a) => (CommandKind::BmLambda, a),
        Command::MuScan(a) => (CommandKind::MuScan, a),
        Command::Verify(a) => (CommandKind::Verify, a),
        Command::BoundaryDump(a) => (CommandKind::BoundaryDump, a),
        Command::KernelDump(a) => (CommandKind::KernelDump, a),
    };
    let settings = args.settings(kind)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    if args.dry_run {
        commands::dry_run(&settings);
        return Ok(());
    }
    match kind {
        CommandKind::BmLambda => commands::bm_lambda(&settings),
        CommandKind::MuScan => commands::mu_scan(&settings),
        CommandKind::Verify => commands::verify(&settings),
        CommandKind::BoundaryDump => commands::boundary_dump(&settings),
        CommandKind::KernelDump => commands::kernel_dump(&settings),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("backflow: {e}");
            ExitCode::from(e.code())
        }
    }
}
