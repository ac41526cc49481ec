//! Batch front end: parses a `key = value` config, dispatches one experiment
//! per invocation, writes CSV files, and reports via exit codes — 0 for all
//! checks passing, 2 for a failed numerical check, 1 for an error, 64 for an
//! unknown command.

mod commands;
mod config;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frachardy", version, about = "Desk-scale experiments for the fractional p-Laplacian with a Hardy potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized sampling; part of the reproducibility contract.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Critical constant, spectral function roots, self-similar amplitude.
    Constants(RunArgs),
    /// Self-similar solution residual and perturbation sensitivity.
    Selfsim(RunArgs),
    /// Generic evolution run with diagnostics.
    Evolve(RunArgs),
    /// Finite-time extinction detection and exponent fit.
    Extinction(RunArgs),
    /// Truncation-level blow-up dichotomy probe.
    Blowup(RunArgs),
    /// Weighted seminorm equivalence and its degenerate breakdown.
    Spaces(RunArgs),
    /// Algebraic inequality sampling and constant search.
    Inequalities(RunArgs),
    /// Discrete Picone inequality on a constructed supersolution.
    Picone(RunArgs),
    /// Closed-form integral bound on the L2 norm along the flow.
    Gronwall(RunArgs),
    /// Growth to a positive steady state (no extinction) with a source.
    Noextinction(RunArgs),
}

fn thread_pool_from_env() {
    if let Ok(v) = std::env::var("FRACHARDY_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    let args = match command {
        Command::Constants(a)
        | Command::Selfsim(a)
        | Command::Evolve(a)
        | Command::Extinction(a)
        | Command::Blowup(a)
        | Command::Spaces(a)
        | Command::Inequalities(a)
        | Command::Picone(a)
        | Command::Gronwall(a)
        | Command::Noextinction(a) => a,
    };
    let cfg = config::load_config(&args.config)?;
    std::fs::create_dir_all(&args.out)?;
    match command {
        Command::Constants(_) => commands::constants(&cfg, &args.out),
        Command::Selfsim(_) => commands::selfsim(&cfg, &args.out),
        Command::Evolve(_) => commands::evolve_cmd(&cfg, &args.out),
        Command::Extinction(_) => commands::extinction(&cfg, &args.out),
        Command::Blowup(_) => commands::blowup(&cfg, &args.out),
        Command::Spaces(_) => commands::spaces(&cfg, &args.out),
        Command::Inequalities(_) => commands::inequalities(&cfg, &args.out, args.seed),
        Command::Picone(_) => commands::picone(&cfg, &args.out, args.seed),
        Command::Gronwall(_) => commands::gronwall(&cfg, &args.out),
        Command::Noextinction(_) => commands::noextinction(&cfg, &args.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand | ErrorKind::UnknownArgument => 64,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    thread_pool_from_env();
    match dispatch(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
