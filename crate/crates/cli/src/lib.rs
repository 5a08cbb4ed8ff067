//! Command-line front end for the conditional modes model.
//!
//! `run` parses arguments, executes one subcommand and returns the process
//! exit code, so the binary stays a one-liner and tests can drive commands
//! in-process.

pub mod commands;
pub mod document;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmm_core::em::EmSettings;
use cmm_core::search::{ChainConfig, ModeSweep};

use crate::error::{exit, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cmm", version, about = "Clustering categorical data with the conditional modes model")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the parameters of one model by EM.
    Fit(FitArgs),
    /// Search structures for a range of class counts and rank them by BIC.
    Select(SelectArgs),
    /// Generate datasets from one of the simulation designs.
    Simulate(SimulateArgs),
    /// Compare mode-number criteria on multinomial samples.
    BenchModes(BenchArgs),
    /// Diagnostics of a fitted model on a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    /// Random EM starts.
    #[arg(long, default_value_t = 25)]
    pub em_starts: usize,
    /// Stop when the log-likelihood gains less than this.
    #[arg(long, default_value_t = 1e-6)]
    pub em_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub em_max_iter: usize,
}

impl EmArgs {
    pub fn settings(&self) -> CliResult<EmSettings> {
        if self.em_starts == 0 {
            return Err(CliError::usage("--em-starts must be at least 1"));
        }
        if !(self.em_tol > 0.0) {
            return Err(CliError::usage("--em-tol must be positive"));
        }
        Ok(EmSettings { starts: self.em_starts, tol: self.em_tol, max_iter: self.em_max_iter })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    Metropolized,
    Neighbourhood,
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Independent chains per class count.
    #[arg(long, default_value_t = 25)]
    pub chains: usize,
    #[arg(long, default_value_t = 3000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    /// Largest block, in crossings, a move may create.
    #[arg(long, default_value_t = 512)]
    pub max_block_size: usize,
    #[arg(long, value_enum, default_value_t = SweepArg::Metropolized)]
    pub mode_sweep: SweepArg,
    /// Skip writing per-chain traces.
    #[arg(long)]
    pub no_trace: bool,
}

impl ChainArgs {
    pub fn config(&self) -> CliResult<ChainConfig> {
        if self.chains == 0 {
            return Err(CliError::usage("--chains must be at least 1"));
        }
        if self.burnin >= self.iters {
            return Err(CliError::usage("--burnin must be smaller than --iters"));
        }
        Ok(ChainConfig {
            iters: self.iters,
            burnin: self.burnin,
            max_block_size: self.max_block_size,
            mode_sweep: match self.mode_sweep {
                SweepArg::Metropolized => ModeSweep::Metropolized,
                SweepArg::Neighbourhood => ModeSweep::Neighbourhood,
            },
            record_trace: !self.no_trace,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV file with a header row of variable names.
    #[arg(long)]
    pub data: PathBuf,
    /// Take the structure (g, blocks, modes) from a model file.
    #[arg(long, conflicts_with_all = ["classes", "cim"])]
    pub spec: Option<PathBuf>,
    /// Number of classes; the structure is searched unless --cim is given.
    #[arg(long, required_unless_present = "spec")]
    pub classes: Option<usize>,
    /// Fit the conditional independence model instead.
    #[arg(long)]
    pub cim: bool,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub gmin: usize,
    #[arg(long, default_value_t = 4)]
    pub gmax: usize,
    /// Also fit the conditional independence model at each g.
    #[arg(long)]
    pub cim: bool,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// One variable with three equiprobable modes.
    Modes,
    /// Draws from a model file, or from the built-in two-class design.
    Cmm,
    /// Two classes with class-specific pairwise couplings.
    Misspec,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub design: Design,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Mass of each mode (modes design).
    #[arg(long, default_value_t = 0.3)]
    pub r: f64,
    /// Number of modalities (modes design).
    #[arg(long, default_value_t = 9)]
    pub s: usize,
    /// Coupling strength (misspec design).
    #[arg(long, default_value_t = 0.8)]
    pub lambda: f64,
    /// Generating model (cmm design).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 0.3)]
    pub r: f64,
    #[arg(long, default_value_t = 9)]
    pub s: usize,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,500")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// truth.json of a simulated dataset, for the KL divergence.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// labels.csv of a simulated dataset, for the confusion table.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Bootstrap replicates of the independence test; 0 skips the test.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap_reps: usize,
    #[command(flatten)]
    pub em: EmArgs,
}

/// Parses `args` (program name first), runs the command, and returns the
/// exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("cmm: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        // a pool may already exist when commands run in-process; keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    std::fs::create_dir_all(&cli.common.out_dir).map_err(|e| CliError::io(&cli.common.out_dir, e))?;
    match &cli.command {
        Command::Fit(a) => commands::fit::run(&cli.common, a),
        Command::Select(a) => commands::select::run(&cli.common, a),
        Command::Simulate(a) => commands::simulate::run(&cli.common, a),
        Command::BenchModes(a) => commands::bench::run(&cli.common, a),
        Command::Evaluate(a) => commands::evaluate::run(&cli.common, a),
    }
}
