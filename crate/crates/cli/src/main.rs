//! `cepfield`: fit, simulate and inspect cepstral lattice models.

use anyhow::Result;
use clap::Parser;

mod commands;
mod config;
mod output;
mod plot;

use commands::Cli;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if let Err(e) = run(args) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(args: Vec<String>) -> Result<()> {
    let args = config::merge_args(args)?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    commands::execute(cli.command)
}
