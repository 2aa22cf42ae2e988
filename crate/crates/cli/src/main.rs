//! `proxlin run|verify|compare --config PATH [--out PATH] [--seed N] [--quiet]`.
//!
//! Exit codes: 0 on success, 1 when a run or an inequality fails, 2 on
//! usage and configuration errors.

mod commands;
mod config;
mod error;
mod output;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{cmd_compare, cmd_run, cmd_verify, Invocation};
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "proxlin", version, about = "Prox-linear solvers for g(x) + h(c(x))")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the [solver] table and write its trace CSV.
    Run(Common),
    /// Check the instance's constants and inequalities; exit 1 on any failure.
    Verify(Common),
    /// Run every [[compare]] entry and write one CSV keyed by oracle count.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output file; standard output when absent from flags and config.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Suppress the summary on standard error.
    #[arg(long)]
    quiet: bool,
}

fn execute(common: Common, f: fn(&Invocation) -> Result<(), CliError>) -> Result<(), CliError> {
    let config = RunConfig::load(&common.config)?;
    f(&Invocation::new(config, common.out, common.seed, common.quiet))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(c) => execute(c, cmd_run),
        Command::Verify(c) => execute(c, cmd_verify),
        Command::Compare(c) => execute(c, cmd_compare),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("proxlin: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
