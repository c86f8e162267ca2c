//! Benchmark harness: generate designs, fit emulators against test
//! functions or tabulated data, run the adaptive partitioning emulator with
//! accuracy checkpoints, and merge the resulting record files.
//!
//! Every command derives its randomness from a master `--seed` through
//! named child streams, so designs and test sets are shared byte-for-byte
//! across methods run with the same seed.

mod commands;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ape-bench", version, about, max_term_width = 100)]
struct Cli {
    /// Directory receiving all output files.
    #[arg(long, env = "APE_BENCH_OUT", global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a design file (CSV plus a JSON sidecar).
    #[command(subcommand)]
    Design(DesignCommand),
    /// Fit one model on one design and benchmark it on a test set.
    Fit(FitArgs),
    /// Run the adaptive partitioning emulator, recording accuracy whenever
    /// the design size crosses a checkpoint.
    Ape(ApeArgs),
    /// Merge benchmark record files into one tidy, sorted report.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum DesignCommand {
    /// Latin hypercube design.
    Lhd {
        /// Number of points.
        #[arg(long)]
        n: usize,
        /// Input dimension.
        #[arg(long)]
        d: usize,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (defaults to a name derived from the parameters).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Sparse grid design.
    Sgd {
        /// Input dimension.
        #[arg(long)]
        d: usize,
        /// Sparse grid level; the point count grows with eta - d.
        #[arg(long)]
        eta: usize,
        /// Output CSV path (defaults to a name derived from the parameters).
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    /// One global GP on a Latin hypercube design.
    StandardGp,
    /// One global GP on a sparse grid design.
    SgdFit,
}

impl FitMethod {
    fn label(self) -> &'static str {
        match self {
            FitMethod::StandardGp => "standard-gp",
            FitMethod::SgdFit => "sgd-fit",
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Registered test function to emulate.
    #[arg(long, conflicts_with = "data")]
    function: Option<String>,
    /// Tabulated training data (x1,...,xd,y CSV) instead of a function.
    #[arg(long, requires = "test_data")]
    data: Option<PathBuf>,
    /// Tabulated test set, required with --data.
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "standard-gp")]
    method: FitMethod,
    /// LHD size to generate (standard-gp without --design).
    #[arg(long)]
    n: Option<usize>,
    /// Sparse grid level to generate (sgd-fit without --design).
    #[arg(long)]
    eta: Option<usize>,
    /// Pre-generated design file to reuse instead of generating one.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Master seed (drives the design and test-set streams).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test-set size when evaluating a function.
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum LooModeArg {
    ClosedForm,
    FullRefit,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorMeasureArg {
    Mse,
    MaxAbs,
}

#[derive(Args)]
struct ApeArgs {
    /// Registered test function to emulate.
    #[arg(long)]
    function: String,
    /// Initial design size; regions are topped up to twice this.
    #[arg(long, default_value_t = 100)]
    n0: usize,
    /// Target total design size.
    #[arg(long = "N")]
    target_n: usize,
    /// Design sizes at which to benchmark the current emulator
    /// (comma-separated; each fires once, when first reached or passed).
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "closed-form")]
    loo_mode: LooModeArg,
    #[arg(long, value_enum, default_value = "mse")]
    error_measure: ErrorMeasureArg,
    /// Test-set size.
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Benchmark record CSVs to merge.
    #[arg(long, num_args = 1.., required = true)]
    records: Vec<PathBuf>,
    /// Output path (defaults to report.csv in the output directory).
    #[arg(long)]
    file: Option<PathBuf>,
    /// Add log10-transformed columns for log-log plotting.
    #[arg(long)]
    log_log: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Design(args) => commands::design(&cli.out, args),
        Command::Fit(args) => commands::fit(&cli.out, args),
        Command::Ape(args) => commands::ape(&cli.out, args),
        Command::Report(args) => commands::report(&cli.out, args),
    }
}
