//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification mismatch, 2 usage error, 3 I/O or
//! format error.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_compare, cmd_compress, cmd_simulate, cmd_sweep, CompareOutcome, CompressReport};
pub use manifest::{digest_outputs, RunManifest, TOOL_VERSION};

use crate::error::Error;
use crate::sim::DEFAULT_FIFO_DEPTH;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const SEED_ENV: &str = "SPARSE_EIE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "sparse-eie",
    version,
    about = "Prune, quantize and simulate sparse matrix-vector hardware"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prune and quantize a DMAT1 matrix into an EIEM1 model.
    Compress(CompressArgs),
    /// Run the PE array simulator on a model and an activation vector.
    Simulate(SimulateArgs),
    /// Check the simulator against the dense reference, bit for bit.
    Compare(CompareArgs),
    /// Compress and simulate one matrix at several densities; emit CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Magnitude,
    Balanced,
    Nm,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    pub matrix: PathBuf,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, value_enum, default_value = "magnitude")]
    pub policy: PolicyArg,
    /// N:M pattern for `--policy nm`, e.g. 2:4.
    #[arg(long, value_name = "N:M")]
    pub nm: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub pes: usize,
    /// Fixed-point fraction bits.
    #[arg(long, default_value_t = 8)]
    pub qbits: u8,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Stats report path; defaults to `<out>.stats.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    pub activations: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FIFO_DEPTH)]
    pub fifo_depth: usize,
    #[arg(long)]
    pub relu: bool,
    #[arg(long)]
    pub fillers_cost_cycle: bool,
    /// Output vector (DMAT1).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report path; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub model: PathBuf,
    pub activations: PathBuf,
    #[arg(long)]
    pub relu: bool,
    #[arg(long, default_value_t = DEFAULT_FIFO_DEPTH)]
    pub fifo_depth: usize,
    /// Run the dense reference on this model instead of `model`.
    #[arg(long)]
    pub oracle_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub matrix: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub densities: Vec<f64>,
    #[arg(long, value_enum, default_value = "magnitude")]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 1)]
    pub pes: usize,
    #[arg(long, default_value_t = DEFAULT_FIFO_DEPTH)]
    pub fifo_depth: usize,
    #[arg(long, default_value_t = 8)]
    pub qbits: u8,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::ConfigMismatch(_) => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

/// Parses `args` (including argv[0]), runs the command and returns the
/// process exit code. Diagnostics go to stderr as one line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Compress(a) => cmd_compress(a).map(|r| {
            println!(
                "wrote {} ({} bits, compression ratio {:.2})",
                a.out.display(),
                r.storage.total_bits,
                r.storage.compression_ratio
            );
            EXIT_OK
        }),
        Command::Simulate(a) => cmd_simulate(a).map(|r| {
            println!(
                "wrote {} ({} cycles, speedup {:.3})",
                a.out.display(),
                r.total_cycles,
                r.speedup
            );
            EXIT_OK
        }),
        Command::Compare(a) => cmd_compare(a).map(|o| match o {
            CompareOutcome::Match { outputs } => {
                println!("ok: {outputs} outputs bit-identical");
                EXIT_OK
            }
            CompareOutcome::Mismatch {
                index,
                sparse_raw,
                dense_raw,
            } => {
                println!("mismatch: index={index} sparse_raw={sparse_raw} dense_raw={dense_raw}");
                EXIT_MISMATCH
            }
        }),
        Command::Sweep(a) => cmd_sweep(a).map(|rows| {
            println!("wrote {} ({} rows)", a.out.display(), rows.len());
            EXIT_OK
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
