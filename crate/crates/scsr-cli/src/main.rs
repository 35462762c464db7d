//! Command-line pipeline for the self-calibrated super-resolution GAN:
//! build degraded datasets, train, reconstruct, evaluate, compare
//! methods, and verify the numerics.
//!
//! Exit codes: 0 on success, 1 on a domain failure (bad data, failed
//! checks, unpaired files), 2 on usage errors.

mod compare;
mod degrade;
mod eval;
mod gradcheck;
mod manifest;
mod sr;
mod train;
mod util;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "scsr", version, about = "Self-calibrated super-resolution pipeline")]
struct Cli {
    /// Worker thread count for parallel stages; 1 forces the
    /// bitwise-deterministic mode the tests rely on.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Crop images and pair them with bicubic downscales (hr/ + lr/).
    Degrade(degrade::DegradeArgs),
    /// Train the generator/discriminator pair on a directory of images.
    Train(train::TrainArgs),
    /// Upscale a directory of images with a trained generator.
    Sr(sr::SrArgs),
    /// Score reconstructions against references (PSNR/SSIM).
    Eval(eval::EvalArgs),
    /// Reconstruct with several methods and tabulate per-dataset means.
    Compare(compare::CompareArgs),
    /// Run the oracle and finite-difference verification suites.
    Gradcheck(gradcheck::GradcheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not configure {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Degrade(args) => degrade::run(args),
        Command::Train(args) => train::run(args),
        Command::Sr(args) => sr::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Compare(args) => compare::run(args),
        Command::Gradcheck(args) => gradcheck::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
