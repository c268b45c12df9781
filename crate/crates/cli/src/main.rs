mod cli;
mod run;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use silverloop_core::Error;

/// Stable, machine-readable name for an error.
fn kind(err: &anyhow::Error) -> &'static str {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. }) => "io",
        Some(Error::Parse { .. }) => "parse",
        Some(Error::Validation(_)) => "validation",
        Some(Error::InvalidLabel { .. }) => "invalid_label",
        Some(Error::MissingTask(_)) => "missing_task",
        Some(Error::Misaligned(_)) => "misaligned",
        Some(Error::Precondition(_)) => "precondition",
        Some(Error::Duplicate(_)) => "duplicate",
        Some(Error::NonFinite { .. }) => "non_finite",
        Some(Error::HeldoutOverlap { .. }) => "heldout_overlap",
        Some(Error::Checkpoint(_)) => "checkpoint",
        None => "runtime",
    }
}

fn main() -> ExitCode {
    let args = cli::Cli::parse();
    let ctx = run::Ctx {
        data_dir: args.data_dir,
        seed: args.seed,
    };
    match run::run(&ctx, args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}");
            eprintln!("{}", json!({ "error": message, "kind": kind(&err) }));
            ExitCode::FAILURE
        }
    }
}
