//! `orbsieve`: experiments on sieves in orbits of matrix groups.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use crate::config::{LoadedConfig, Subcommand};
use crate::run::{RunError, RunOptions};

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;

#[derive(Parser)]
#[command(name = "orbsieve", version, about = "Sieve experiments in orbits of matrix groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Enumerate an Apollonian packing and sift its curvatures.
    Apollonian(Common),
    /// Check surjectivity of reduction over a prime range.
    Strongapprox(Common),
    /// Tabulate mean-zero spectral radii of Cayley graphs.
    Spectral(Common),
    /// Sift an integer sequence.
    Sieve(Common),
    /// Almost-prime fractions along random walks.
    Saturation(Common),
    /// Homology statistics of random Heegaard splittings.
    Dt3m(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Continue from a walk checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common) = match cli.command {
        Command::Apollonian(c) => (Subcommand::Apollonian, c),
        Command::Strongapprox(c) => (Subcommand::Strongapprox, c),
        Command::Spectral(c) => (Subcommand::Spectral, c),
        Command::Sieve(c) => (Subcommand::Sieve, c),
        Command::Saturation(c) => (Subcommand::Saturation, c),
        Command::Dt3m(c) => (Subcommand::Dt3m, c),
    };
    if let Some(n) = common.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
    }
    let mut loaded = match LoadedConfig::from_file(&common.config) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    if let Some(seed) = common.seed {
        loaded.config.seed = seed;
    }
    let opts = RunOptions { out: common.out, resume: common.resume };
    match run::run(sub, &loaded, &opts) {
        Ok(outcome) => {
            for p in &outcome.written {
                println!("{}", p.display());
            }
            if outcome.complete {
                ExitCode::SUCCESS
            } else {
                eprintln!("warning: effort bounds were hit; outputs are flagged incomplete");
                ExitCode::from(EXIT_INCOMPLETE)
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
