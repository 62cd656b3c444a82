//! Command-line surface for the multiscale sparse unmixing library:
//! synthetic data generation, segmentation, unmixing, evaluation and
//! reproducible parameter sweeps.
//!
//! Exit codes: 0 on success, 1 on validation errors, 2 on I/O errors.

pub mod bench;
pub mod commands;
pub mod report;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::ffi::OsString;

#[derive(Parser)]
#[command(
    name = "mua",
    version,
    about = "Sparse hyperspectral unmixing with multiscale spatial regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cube, its ground-truth abundances and a library.
    Synth(commands::SynthArgs),
    /// Segment a cube and write the segment map as text.
    Segment(commands::SegmentArgs),
    /// Unmix a cube against a library.
    Unmix(commands::UnmixArgs),
    /// Score an estimate against ground truth and append a CSV row.
    Eval(commands::EvalArgs),
    /// Run a Cartesian parameter sweep and collect one CSV row per cell.
    Bench(bench::BenchArgs),
}

pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(args) => commands::run_synth(&args),
        Command::Segment(args) => commands::run_segment(&args),
        Command::Unmix(args) => commands::run_unmix(&args),
        Command::Eval(args) => commands::run_eval(&args),
        Command::Bench(args) => bench::run_bench(&args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_io() {
                2
            } else {
                1
            }
        }
    }
}
