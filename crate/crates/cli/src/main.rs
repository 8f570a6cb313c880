use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod datagen;
mod sweep;

/// Experiments and verification for the NGN stepsize.
#[derive(Debug, Parser)]
#[command(name = "ngn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment or sweep file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true, env = "NGN_OUT_DIR")]
    out: Option<PathBuf>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Added to every seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment: a trace CSV per seed plus an aggregate CSV.
    Run,
    /// Run an experiment over a grid of one policy parameter.
    Sweep,
    /// Run verification suites and exit nonzero if any check fails.
    Verify {
        /// lemmas, theorems, stability, gradients, stepsizes or all.
        suite: String,
    },
    /// Write a synthetic dataset in LIBSVM format.
    Datagen {
        /// `blobs(n=200, d=5, classes=3, seed=7)` or
        /// `linreg(d=10, n=100, seed=0, noise=0.1)`.
        spec: String,
        /// Destination file.
        path: PathBuf,
    },
}

/// Exit codes: 0 ok, 1 run or check failure, 2 configuration error.
pub enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Run(_) => 1,
            Failure::Config(_) => 2,
        }
    }
}

pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed_offset: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let opts = Options { config: cli.config, out: cli.out, seed_offset: cli.seed_offset };
    let result = match cli.command {
        Command::Run => commands::run(&opts),
        Command::Sweep => commands::sweep(&opts),
        Command::Verify { suite } => commands::verify(&opts, &suite),
        Command::Datagen { spec, path } => datagen::datagen(&spec, &path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) => eprintln!("config error: {e:#}"),
                Failure::Run(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
