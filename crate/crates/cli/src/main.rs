//! `wfb`: design and check synthesis banks from the command line.

mod commands;
mod config;
mod output;
mod reproduce;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "wfb",
    version,
    about = "MSE-optimal and perfect-reconstruction FIR synthesis banks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design the Wiener synthesis bank for one delay.
    Design(ProblemArgs),
    /// Check whether the analysis bank admits perfect reconstruction.
    CheckPr(CheckPrArgs),
    /// Analytic MSE for a range of delays.
    MseScan(ProblemArgs),
    /// Run signals through the analysis and synthesis banks.
    Simulate(SimulateArgs),
    /// Regenerate the tables and series of a reference experiment.
    Reproduce(ReproduceArgs),
}

/// Flags shared by the design-type commands. Values given on the command
/// line override those read from `--config`.
#[derive(Args, Clone, Default)]
pub struct ProblemArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Analysis bank: TOML bank file, or CSV of taps (one filter per row,
    /// requires --decimation).
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Common decimation factor for CSV banks.
    #[arg(long)]
    pub decimation: Option<usize>,
    /// Input model: `white[:var]`, `ar:a1,a2,...` (unit variance),
    /// `ar-noise:var:a1,...`, `acf:r0,r1,...`, `samples:file.csv`.
    #[arg(long)]
    pub model: Option<String>,
    /// Synthesis filter length P.
    #[arg(long = "length")]
    pub length: Option<usize>,
    /// Reconstruction delay d.
    #[arg(long)]
    pub delay: Option<usize>,
    /// Delays to scan: `a..b` (half open), `a..=b`, or `a,b,c`.
    #[arg(long)]
    pub delays: Option<String>,
    /// Free parameter w: `zero`, `random`, or a CSV file with LP values.
    #[arg(long)]
    pub w: Option<String>,
    /// Zero-block tolerance relative to ‖K†K‖_∞.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include the startup transient in error statistics.
    #[arg(long)]
    pub include_transient: bool,
}

#[derive(Args)]
pub struct CheckPrArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// PR gain c.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Print the machine-readable certificate instead of the summary.
    #[arg(long)]
    pub toml: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DesignKind {
    Wiener,
    Pr,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum InputKind {
    /// Realizations of the AR model given by --model.
    Model,
    /// Standard normal noise times sin(0.1 n²).
    Modulated,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "wiener")]
    pub design: DesignKind,
    #[arg(long, value_enum, default_value = "model")]
    pub input: InputKind,
    /// Samples per realization.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of independent realizations.
    #[arg(long)]
    pub runs: Option<usize>,
    /// PR gain c (with --design pr).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Args)]
pub struct ReproduceArgs {
    /// Experiment number.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    pub experiment: u8,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Ensemble size (experiment 1).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Samples per realization (experiments 1 and 3).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub include_transient: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Experiment 1: lowpass and highpass filter lengths.
    #[arg(long, num_args = 2, value_names = ["LOWPASS", "HIGHPASS"])]
    pub filter_lengths: Option<Vec<usize>>,
    /// Experiment 2: ELT prototype window as a bank file with one channel.
    #[arg(long)]
    pub prototype: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Design(args) => commands::design(args),
        Command::CheckPr(args) => commands::check_pr(args),
        Command::MseScan(args) => commands::mse_scan(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Reproduce(args) => reproduce::run(args),
    }
}
