//! Parses a manifest and shows how each split partitions it.
//!
//!     cargo run --example ingest_manifest [-- path/to/manifest.txt]
//!
//! Without an argument it uses the whole-leaf class counts.

use bottleneck::dataset::{class_distribution, load_manifest, standard_splits, stratified_split};
use bottleneck::fixtures::original_manifest;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = match std::env::args().nth(1) {
        Some(path) => load_manifest(path)?,
        None => original_manifest(),
    };
    let counts = class_distribution(&manifest);
    println!("{}: {} samples", manifest.name, manifest.samples.len());
    for label in &manifest.labels {
        println!("  {:<10} {}", label.name, counts[&label.id]);
    }

    println!("\nsplit   train  validation  test");
    for split in standard_splits(42) {
        let parts = stratified_split(&manifest, &split)?;
        println!(
            "{:<7} {:>5} {:>11} {:>5}",
            split.label(),
            parts.train_ids.len(),
            parts.validation_ids.len(),
            parts.test_ids.len()
        );
    }
    Ok(())
}
