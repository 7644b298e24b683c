//! Command-line front end. Parsing and dispatch live here; the report
//! logic is in the commands module and all mathematics in the library.

use std::path::PathBuf;
use std::process;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod cache;
mod commands;

use commands::{
    cmd_count, cmd_criterion, cmd_group_audit, cmd_raynaud, cmd_simulate, Global, ModelKind,
};

#[derive(Parser)]
#[command(
    name = "isogeny-radical",
    version,
    about = "Divisibility-based isogeny testing with its group and inertia audits"
)]
struct Cli {
    /// Seed for every randomized step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for the place scan
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    jobs: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record point counts for every curve in a file into a cache
    Count {
        curve_file: PathBuf,
        /// Largest place to count at
        #[arg(long)]
        pmax: u64,
        /// Cache file; relative paths resolve under ISOGENY_RADICAL_CACHE_DIR
        #[arg(long)]
        cache: PathBuf,
    },
    /// Scan a pair of curves for a divisibility witness
    Criterion {
        curve_file: PathBuf,
        /// The two labels to compare
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        labels: Vec<String>,
        /// Largest place to scan
        #[arg(long)]
        pmax: u64,
        /// Comma-separated odd primes to test divisibility against
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<u64>,
    },
    /// Measure determinant coincidence across a joint-image model
    Simulate {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=8))]
        g: u64,
        #[arg(long)]
        ell: u64,
        /// Sample this many pairs instead of enumerating
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..), conflicts_with = "exhaustive")]
        trials: Option<u64>,
        /// Force full enumeration even when sampling would be the default
        #[arg(long)]
        exhaustive: bool,
    },
    /// Order, valuation, and normal subgroups of the symplectic group
    GroupAudit {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=8))]
        g: u64,
        #[arg(long)]
        ell: u64,
    },
    /// Tabulate tame-inertia invariants against their bound
    RaynaudBound {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        g: u64,
        #[arg(long)]
        ellmax: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let start = Instant::now();
    let global = Global {
        seed: cli.seed,
        jobs: cli.jobs as usize,
    };
    let result = match &cli.command {
        Command::Count {
            curve_file,
            pmax,
            cache,
        } => cmd_count(&global, curve_file, *pmax, cache),
        Command::Criterion {
            curve_file,
            labels,
            pmax,
            lambda,
        } => cmd_criterion(&global, curve_file, labels, *pmax, lambda),
        Command::Simulate {
            model,
            g,
            ell,
            trials,
            exhaustive,
        } => cmd_simulate(&global, *model, *g as usize, *ell, *trials, *exhaustive),
        Command::GroupAudit { g, ell } => cmd_group_audit(&global, *g as usize, *ell),
        Command::RaynaudBound { g, ellmax } => cmd_raynaud(&global, *g as usize, *ellmax),
    };
    let code = match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.msg);
            failure.code
        }
    };
    eprintln!("# elapsed_ms={}", start.elapsed().as_millis());
    process::exit(code);
}
