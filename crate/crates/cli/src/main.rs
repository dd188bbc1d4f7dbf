mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::output::Format;

#[derive(Parser, Debug)]
#[command(name = "sigsearch", version, about = "Search games on trees with noisy branch signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output format; defaults to text, or csv for tables
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the game: value, mean depth, Hider distribution, favoring biases
    Solve {
        #[arg(long)]
        tree: PathBuf,
        /// Signal accuracy, decimal or fraction such as 2/3
        #[arg(long)]
        p: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Cross-check the recursion against the full matrix game
    Oracle {
        #[arg(long, requires = "p", conflicts_with = "random")]
        tree: Option<PathBuf>,
        #[arg(long)]
        p: Option<String>,
        /// Number of seeded random trees to check instead of a file
        #[arg(long, required_unless_present = "tree")]
        random: Option<usize>,
        #[arg(long, default_value_t = 4)]
        max_leaves: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest number of branch nodes to enumerate
        #[arg(long, default_value_t = sigsearch::oracle::DEFAULT_CAP)]
        cap: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve over a grid of p values
    Sweep {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        start: String,
        #[arg(long, default_value = "1")]
        stop: String,
        #[arg(long, default_value = "0.01")]
        step: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Values on perfect binary trees B_1 .. B_n of total length `scale`
    BnTable {
        #[arg(long)]
        n_max: u32,
        #[arg(long)]
        p: String,
        #[arg(long, default_value = "1")]
        scale: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo estimate of the expected capture time
    Simulate {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Searcher policy JSON; defaults to the optimal policy
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Write every play as a JSON line to this file
        #[arg(long)]
        play_log: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// How a successful run ended.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    VerificationFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
