//! Command-line front end: file formats, run configuration and the `spod`
//! subcommands.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod store;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use format::{read_snapshots, write_snapshots};

#[derive(Debug, Parser)]
#[command(name = "spod", version, about = "Shifted POD of transport-dominated snapshot data")]
pub struct Cli {
    /// Worker threads for candidate and snapshot parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic snapshot set.
    Generate(GenerateArgs),
    /// Estimate shifts of tracked frames and write them as CSV.
    Track(TrackArgs),
    /// POD baseline: mode count for a tolerance and singular-value decay.
    Pod(PodArgs),
    /// Run the greedy shifted POD described by a config file.
    Spod(SpodArgs),
    /// Rebuild snapshots from a stored decomposition.
    Reconstruct(ReconstructArgs),
    /// Relative error between two snapshot files.
    Error(ErrorArgs),
    /// Error-versus-modes tables for POD and a finished sPOD run.
    ExportCurves(CurvesArgs),
    /// Convert between the binary snapshot format and CSV.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Wave,
    ThreeSignal,
    CrossingFronts,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub scenario: Scenario,
    /// Snapshot file (`.csv` selects CSV).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the ground-truth shifts.
    #[arg(long)]
    pub shifts: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub final_time: Option<f64>,
    /// Wave speed (wave).
    #[arg(long)]
    pub c: Option<f64>,
    /// Reference density (wave).
    #[arg(long)]
    pub rho_ref: Option<f64>,
    /// Width of the initial pulse (wave).
    #[arg(long)]
    pub pulse_width: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Directory for the shift files (default: the config's output).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PodArgs {
    #[arg(short, long)]
    pub snapshots: PathBuf,
    /// Bound on the relative Frobenius error.
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub scale: bool,
    /// Singular-value decay table.
    #[arg(long)]
    pub decay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpodArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Suppress progress lines.
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Output directory of an `spod` run.
    #[arg(short, long)]
    pub decomposition: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ErrorArgs {
    #[arg(short, long)]
    pub reference: PathBuf,
    #[arg(short, long)]
    pub approximation: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Output directory of an `spod` run.
    #[arg(short, long)]
    pub decomposition: PathBuf,
    /// Snapshots for the POD curve (default: those of the run).
    #[arg(short, long)]
    pub snapshots: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Largest POD rank listed (default: full rank).
    #[arg(long)]
    pub max_modes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Grid boundary of a CSV input.
    #[arg(long, default_value = "periodic")]
    pub boundary: String,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code: 0 success, 1 usage, 2 data, 3
/// convergence.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| commands::dispatch(cli.command)),
            Err(e) => Err(CliError::usage(format!("cannot start {t} threads: {e}"))),
        },
        None => commands::dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
