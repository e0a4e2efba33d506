//! `ris-dcc`: configuration-driven experiments over the diffractional
//! channel coding toolkit.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config error, 3 constraint
//! violation, 4 infeasible search space.

mod commands;
mod config;
mod error;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Sink;
use config::Config;
use error::CliError;

#[derive(Parser)]
#[command(name = "ris-dcc", version, about = "Diffractional channel coding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; without one, every key comes from --set.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override a config key, e.g. `--set snr.stop_db=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file, overriding `output`; stdout when neither is given.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// One config per curve. Repeatable.
    #[arg(long = "config", value_name = "PATH", required = true)]
    configs: Vec<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Applied to every config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the geometry against the physical constraints.
    Validate(Common),
    /// Dump the generator matrix as `row,col,re,im` CSV.
    GenMatrix(Common),
    /// Encode `encode.datawords` with the configured code.
    Encode(Common),
    /// Pairwise codeword distance spectrum CSV.
    Distance(Common),
    /// Max-min distance geometry search; writes a geometry file and trace CSV.
    Optimize(Common),
    /// Monte-Carlo BER sweep CSV.
    Ber(Common),
    /// BER sweeps of several configs merged into one CSV.
    Compare(CompareArgs),
}

fn prepare(path: Option<&PathBuf>, seed: Option<u64>, overrides: &[String]) -> Result<Config, CliError> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::from_str("")?,
    };
    for o in overrides {
        cfg.set(o)?;
    }
    if let Some(s) = seed {
        cfg.set(&format!("seed={s}"))?;
    }
    Ok(cfg)
}

fn sink(cfg: &Config, output: Option<PathBuf>) -> Result<Sink, CliError> {
    Ok(match output {
        Some(p) => Sink::File(p),
        None => match cfg.opt_str("output")? {
            Some(p) => Sink::File(cfg.resolve(&p)),
            None => Sink::Stdout,
        },
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let single = |c: Common, f: fn(&Config, &Sink) -> Result<(), CliError>| -> Result<(), CliError> {
        let cfg = prepare(c.config.as_ref(), c.seed, &c.overrides)?;
        let out = sink(&cfg, c.output)?;
        f(&cfg, &out)
    };
    match cli.command {
        Command::Validate(c) => single(c, commands::validate),
        Command::GenMatrix(c) => single(c, commands::gen_matrix),
        Command::Encode(c) => single(c, commands::encode),
        Command::Distance(c) => single(c, commands::distance),
        Command::Optimize(c) => single(c, commands::optimize_cmd),
        Command::Ber(c) => single(c, commands::ber),
        Command::Compare(a) => {
            let cfgs = a
                .configs
                .iter()
                .map(|p| prepare(Some(p), a.seed, &a.overrides))
                .collect::<Result<Vec<_>, _>>()?;
            let out = sink(&cfgs[0], a.output)?;
            commands::compare(&cfgs, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ris-dcc: {e}");
            e.exit_code()
        }
    }
}
