//! Runs a campaign config and prints its summary table.
//!
//! Usage: `cargo run --release --example campaign -- [config.toml] [out-dir]`
//! Defaults to the smoke config and a fresh temporary directory.

use std::path::PathBuf;

use dpsgd_audit::campaign::{run_campaign, summarize, RunOptions};

fn main() -> dpsgd_audit::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/campaigns/smoke.toml"));
    let out = match args.next() {
        Some(dir) => PathBuf::from(dir),
        None => std::env::temp_dir().join(format!("dpsgd-audit-campaign-{}", std::process::id())),
    };
    let outcome = run_campaign(&config, &RunOptions { out: out.clone(), ..RunOptions::default() })?;
    println!("{} cells, {} reports in {}", outcome.cells.len(), outcome.reports.len(), out.display());
    for row in summarize(&outcome.reports) {
        println!("{row:?}");
    }
    Ok(())
}
