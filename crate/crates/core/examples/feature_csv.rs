//! Writes a feature CSV (features then label, no header) that the
//! last-layer campaign config can read.
//!
//! Usage: `cargo run --example feature_csv -- [path] [classes] [dim] [per-class]`

use std::path::PathBuf;

use dpsgd_audit::data::synth_blobs;

fn main() -> dpsgd_audit::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/campaigns/features.csv"));
    let mut num = |default: usize| args.next().map_or(default, |a| a.parse().expect("integer"));
    let (classes, dim, per_class) = (num(10), num(32), num(60));
    let data = synth_blobs(classes, dim, per_class, 3.0, 17)?;
    let mut writer = csv::Writer::from_path(&path)?;
    for s in data.samples() {
        let mut row: Vec<String> = s.features.iter().map(|v| format!("{v:.6}")).collect();
        row.push(s.label.to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    println!("wrote {} rows to {}", data.len(), path.display());
    Ok(())
}
