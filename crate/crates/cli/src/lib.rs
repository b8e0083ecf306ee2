//! `segplan` command line: synthesize and inspect masks, estimate MinBAT
//! targets, export the expected-DSC curve, plan REPS patches, fit learning
//! curves, and combine them into a data-sufficiency verdict.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! validation errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
mod error;
mod output;

pub use error::CliError;
pub use output::{Format, Header};

#[derive(Debug, Parser)]
#[command(name = "segplan", version, about = "Data-requirement planning for 3D segmentation")]
pub struct Cli {
    /// Worker thread cap. Outputs are identical for any value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for written artifacts.
    #[arg(long, global = true, env = "SEGPLAN_OUT_DIR", default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic masks from a JSON spec file.
    Synth(commands::synth::SynthArgs),
    /// Volume, surface and S/V ratio per mask.
    Stats(commands::stats::StatsArgs),
    /// Estimate the achievable-DSC target by random boundary perturbation.
    Minbat(commands::minbat::MinbatArgs),
    /// Tabulate expected DSC against S/V ratio.
    Theory(commands::theory::TheoryArgs),
    /// Plan expanded patches for one mask and sample epochs.
    Reps(commands::reps::RepsArgs),
    /// Fit learning-curve laws and invert them at a target.
    Fit(commands::curves::FitArgs),
    /// Predict required data from growing prefixes of the observations.
    Predict(commands::curves::PredictArgs),
    /// Stats, MinBAT target and curve fits in one verdict.
    Pipeline(commands::pipeline::PipelineArgs),
}

/// Parse `args` (program name first), execute, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let out = output::Output::new(&cli.out);
    let go = || match &cli.command {
        Command::Synth(a) => commands::synth::run(a, &out),
        Command::Stats(a) => commands::stats::run(a, &out),
        Command::Minbat(a) => commands::minbat::run(a, &out),
        Command::Theory(a) => commands::theory::run(a, &out),
        Command::Reps(a) => commands::reps::run(a, &out),
        Command::Fit(a) => commands::curves::run_fit(a, &out),
        Command::Predict(a) => commands::curves::run_predict(a, &out),
        Command::Pipeline(a) => commands::pipeline::run(a, &out),
    };
    match cli.threads {
        None => go(),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(go),
    }
}
