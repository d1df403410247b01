mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// An error that ends the process with a specific exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn self_check(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }

    pub fn coverage(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

#[derive(Debug, Parser)]
#[command(name = "transloop", version, about = "Generate-and-check C-to-Rust translation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[command(flatten)]
    overrides: config::Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus characteristics (LOC, NLOC, tokens, cyclomatic complexity).
    Stats {
        #[command(flatten)]
        common: Common,
        /// Only aggregate files of this group.
        #[arg(long)]
        group: Option<String>,
    },
    /// Write perturbed copies of the corpus and self-check them.
    Perturb {
        #[command(flatten)]
        common: Common,
        /// Run index whose seeds are used for stochastic perturbations.
        #[arg(long, default_value_t = 0)]
        seed: u32,
        /// Parent directory of the perturbed corpora; next to the corpus by default.
        #[arg(long)]
        out_root: Option<PathBuf>,
        /// Do not fuzz perturbed copies against the originals.
        #[arg(long)]
        skip_self_check: bool,
    },
    /// Run (or resume) the translation experiment into the ledger.
    Translate {
        #[command(flatten)]
        common: Common,
        /// Stop after this many new runs.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Compute analyses from one or more ledgers.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        analyses: commands::Analyses,
        /// Additional ledgers, merged with the configured one.
        #[arg(long = "with-ledger")]
        extra_ledgers: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Stats { common, group } => {
            let c = config::CliConfig::load(&common.config, &common.overrides)?;
            commands::stats(&c, group.as_deref())
        }
        Command::Perturb { common, seed, out_root, skip_self_check } => {
            let c = config::CliConfig::load(&common.config, &common.overrides)?;
            commands::perturb(&c, seed, out_root, !skip_self_check)
        }
        Command::Translate { common, limit } => {
            let c = config::CliConfig::load(&common.config, &common.overrides)?;
            commands::translate(&c, limit)
        }
        Command::Evaluate { common, analyses, extra_ledgers } => {
            let c = config::CliConfig::load(&common.config, &common.overrides)?;
            commands::evaluate(&c, &analyses, &extra_ledgers)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.downcast_ref::<Failure>().map_or(1, |f| f.code))
        }
    }
}
