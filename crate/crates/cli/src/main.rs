mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;

use args::Cli;
use commands::{execute, Manifest};

const DEFAULT_OUT_DIR: &str = "nadp-out";

fn run(cli: Cli) -> Result<()> {
    match (cli.config, cli.command) {
        (Some(_), Some(_)) => bail!("give either --config or a subcommand, not both"),
        (None, None) => bail!("no subcommand given (see --help)"),
        (Some(path), None) => {
            let manifest = Manifest::load(&path)?;
            let out_dir = cli.out_dir.unwrap_or(manifest.out_dir);
            log::info!("re-running {} from {}", manifest.command.name(), path.display());
            execute(manifest.command, out_dir)
        }
        (None, Some(command)) => execute(command, cli.out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
