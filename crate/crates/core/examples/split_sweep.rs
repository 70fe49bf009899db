//! The full split x head grid on the blob benchmark.
//!
//!     cargo run --release --example split_sweep [-- sigma]
//!
//! Raising sigma makes the task harder and shows how little the split
//! ratio matters compared with the head.

use bottleneck::dataset::standard_splits;
use bottleneck::eval::run_sweep_with_progress;
use bottleneck::fixtures::BlobSpec;
use bottleneck::heads::{HeadKind, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1.0);
    let (manifest, embeddings) = BlobSpec {
        sigma,
        ..BlobSpec::default()
    }
    .generate();
    let report = run_sweep_with_progress(
        &manifest,
        &embeddings,
        &standard_splits(42),
        &HeadKind::ALL,
        &TrainingConfig::default().with_seed(42),
        &|ev| eprintln!("[{:>2}/{}] {} {}", ev.completed, ev.total, ev.split_label, ev.head),
    )?;
    print!("{}", report.render_grid());
    println!("lowest cell {:.4}", report.min_accuracy());
    Ok(())
}
