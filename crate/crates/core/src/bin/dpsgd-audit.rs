use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpsgd_audit::campaign::{emit_summary, run_campaign, RunOptions, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "dpsgd-audit", version, about = "Black-box DP-SGD audit campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a campaign config and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required_unless_present = "dry_run")]
        out: Option<PathBuf>,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Validate and print the expanded grid only.
        #[arg(long)]
        dry_run: bool,
        /// Write into an existing output directory.
        #[arg(long)]
        force: bool,
    },
    /// Rebuild summary.csv from a campaign output directory.
    Summarize { dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run { config, out, workers, seed, dry_run, force } => {
            let opts = RunOptions { out: out.unwrap_or_default(), workers, seed, dry_run, force };
            run_campaign(&config, &opts).map(|o| {
                if let Some(path) = o.summary {
                    println!("{} reports; summary at {}", o.reports.len(), path.display());
                }
            })
        }
        Command::Summarize { dir } => emit_summary(&dir).map(|p| println!("{}", p.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
