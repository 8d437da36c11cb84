//! Batch front-end: calibrate, price, simulate exposure, compute XVA and
//! model-risk AVA, run convergence ladders, dump SIMM sensitivities.
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use xva_core::Error;

#[derive(Parser)]
#[command(name = "xva-engine", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file.
    #[arg(long, global = true, default_value = "run.conf")]
    config: PathBuf,
    /// Overrides `[calc].seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `[calc].threads` (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `[output].dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-step calibration to the ATM swaption matrix.
    Calibrate,
    /// Valuation-date prices of the configured instruments.
    Price,
    /// EPE/ENE profiles per instrument under the configured scheme.
    Exposure,
    /// CVA/DVA summary rows per instrument.
    Xva,
    /// Model-risk AVA over a family of calculation frameworks.
    Ava,
    /// CVA/DVA convergence ladders in path count and grid granularity.
    Convergence,
    /// Per-path SIMM sensitivity dump.
    SimmAudit,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match config::load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Price => commands::price(&cfg),
        Command::Exposure => commands::exposure(&cfg),
        Command::Xva => commands::xva(&cfg),
        Command::Ava => commands::ava(&cfg),
        Command::Convergence => commands::convergence(&cfg),
        Command::SimmAudit => commands::simm_audit(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Config { .. }
        | Error::InvalidInput(_) => 1,
        _ => 2,
    }
}
