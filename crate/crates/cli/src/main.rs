//! `cmi`: adaptive test of conditional moment inequalities.
//!
//! Exit status: 0 no rejection, 3 rejection, 2 usage or configuration
//! error, 4 unreadable or malformed input, 1 anything else.

mod commands;
mod config;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::TestFlags;
use crate::error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "cmi", version, about = "Adaptive test of conditional moment inequalities")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test E[Y | X] <= 0 on a CSV file with columns x1..xd, y1..yp.
    Test {
        /// Input CSV; may instead be named by the config file.
        csv: Option<PathBuf>,
        #[command(flatten)]
        flags: TestFlags,
        /// Directory for result.json [default: .].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rejection-rate table of the simulation study.
    Mc(commands::McArgs),
    /// Finite-sample size diagnostic of the randomized test (needs --beta > 0).
    Diag {
        csv: Option<PathBuf>,
        #[command(flatten)]
        flags: TestFlags,
    },
    /// Simulation probes of the bounds behind the test.
    Probe {
        #[command(subcommand)]
        kind: commands::ProbeKind,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set thread count: {e}")))?;
    }
    let env_seed = std::env::var(config::SEED_ENV).ok();
    let env_seed = env_seed.as_deref();
    match cli.command {
        Command::Test { csv, flags, out } => commands::test(csv, &flags, out, env_seed),
        Command::Mc(args) => commands::mc(&args, env_seed),
        Command::Diag { csv, flags } => commands::diag(csv, &flags, env_seed),
        Command::Probe { kind } => commands::probe(&kind, env_seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
