//! Loads an IDX image/label pair (MNIST layout) and prints class counts.
//! Without arguments, writes a tiny synthetic pair first.
//!
//! Usage: `cargo run --example idx_loader -- [images.idx labels.idx]`

use std::path::PathBuf;

use dpsgd_audit::data::{load_idx, write_idx};

fn main() -> dpsgd_audit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (images, labels) = if let [i, l] = args.as_slice() {
        (PathBuf::from(i), PathBuf::from(l))
    } else {
        let dir = std::env::temp_dir();
        let (i, l) = (dir.join("dpsgd-audit-images.idx"), dir.join("dpsgd-audit-labels.idx"));
        let pixels: Vec<Vec<u8>> = (0..20u8).map(|k| (0..16).map(|p| k.wrapping_mul(13).wrapping_add(p * 7)).collect()).collect();
        let classes: Vec<u8> = (0..20).map(|k| k % 10).collect();
        write_idx(&i, &l, 4, 4, &pixels, &classes)?;
        (i, l)
    };
    let data = load_idx(&images, &labels)?;
    println!("{} samples, {} features, {} classes", data.len(), data.dim(), data.num_classes());
    let mut counts = vec![0usize; data.num_classes()];
    for s in data.samples() {
        counts[s.label] += 1;
    }
    println!("class counts {counts:?}");
    let first = &data.samples()[0].features;
    println!("first sample pixels scaled to [0, 1]: {:?}", &first[..first.len().min(8)]);
    Ok(())
}
