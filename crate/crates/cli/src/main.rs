//! Batch experiment runner: JSON config in, CSV/JSON results out.
//!
//! Exit codes: 0 success, 2 validation error, 3 infeasibility, 4 horizon or
//! cap exceeded. Failures print a single machine-readable JSON line to
//! stderr.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use bklab::Error;

#[derive(Parser)]
#[command(name = "bklab", version, about = "Complete-convergence experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for emitted files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps worker threads; never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponent table rows q(regime, r, p).
    Exponent,
    /// Run one envelope construction and report its postconditions.
    Envelope,
    /// Build a counterexample process: block table, k0, moments.
    Spec,
    /// Exact tail probabilities on an n-grid.
    Oracle,
    /// Monte Carlo tail estimates on an n-grid.
    Simulate,
    /// Doob/Shao bounds against simulation on an x-grid.
    #[command(name = "bounds-check")]
    BoundsCheck,
    /// Assemble the weighted series ledger and divergence certificates.
    Series,
    /// Finite-horizon diagnostics for the derived strong-law statements.
    Statement1,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Invalid(_) | Error::Unsupported(_) => 2,
        Error::Infeasible(_) | Error::ScanFailed(_) => 3,
        Error::OutOfDomain { .. }
        | Error::HorizonExceeded { .. }
        | Error::SupportCapExceeded { .. }
        | Error::EnumerationCapExceeded { .. } => 4,
    }
}

fn kind_for(code: u8) -> &'static str {
    match code {
        2 => "validation",
        3 => "infeasible",
        _ => "cap_exceeded",
    }
}

fn fail(code: u8, message: &str) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({
            "error": { "code": code, "kind": kind_for(code), "message": message }
        })
    );
    ExitCode::from(code)
}

fn load_config<T: DeserializeOwned>(path: &Option<PathBuf>) -> Result<T, (u8, String)> {
    let path = path
        .as_ref()
        .ok_or((2u8, "--config <path> is required".to_string()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| (2u8, format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| (2u8, format!("config parse error: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return fail(2, &format!("cannot configure {threads} threads: {e}"));
        }
    }
    let Some(out) = cli.out.clone() else {
        return fail(2, "--out <dir> is required");
    };
    let over = commands::Overrides {
        seed: cli.seed,
        trials: cli.trials,
    };

    let result = match cli.command {
        Command::Exponent => {
            load_config(&cli.config).and_then(|cfg| dispatch(commands::run_exponent(cfg, &out)))
        }
        Command::Envelope => {
            load_config(&cli.config).and_then(|cfg| dispatch(commands::run_envelope(cfg, &out)))
        }
        Command::Spec => {
            load_config(&cli.config).and_then(|cfg| dispatch(commands::run_spec(cfg, &out)))
        }
        Command::Oracle => {
            load_config(&cli.config).and_then(|cfg| dispatch(commands::run_oracle(cfg, &out)))
        }
        Command::Simulate => load_config(&cli.config)
            .and_then(|cfg| dispatch(commands::run_simulate(cfg, &out, &over))),
        Command::BoundsCheck => load_config(&cli.config)
            .and_then(|cfg| dispatch(commands::run_bounds_check(cfg, &out, &over))),
        Command::Series => load_config(&cli.config)
            .and_then(|cfg| dispatch(commands::run_series(cfg, &out, &over))),
        Command::Statement1 => load_config(&cli.config)
            .and_then(|cfg| dispatch(commands::run_statement1(cfg, &out, &over))),
    };

    match result {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err((code, message)) => fail(code, &message),
    }
}

fn dispatch(result: bklab::Result<String>) -> Result<String, (u8, String)> {
    result.map_err(|e| (exit_code_for(&e), e.to_string()))
}
