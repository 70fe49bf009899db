//! Evaluates a kNN head and writes the JSON, CSV and plot-data reports.
//!
//!     cargo run --release --example confusion_report [-- out_dir]

use bottleneck::dataset::{stratified_split, SplitConfig};
use bottleneck::eval::{emit_report, evaluate, ReportFormat};
use bottleneck::fixtures::BlobSpec;
use bottleneck::heads::{train_head, HeadKind, LabeledEmbeddings, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "report-out".into());
    let spec = BlobSpec {
        sigma: 2.5,
        ..BlobSpec::default()
    };
    let (manifest, embeddings) = spec.generate();
    let split = SplitConfig::new(0.4, 0.5, 3);
    let parts = stratified_split(&manifest, &split)?;
    let train = LabeledEmbeddings::from_ids(&embeddings, &manifest, &parts.train_ids)?;
    let test = LabeledEmbeddings::from_ids(&embeddings, &manifest, &parts.test_ids)?;
    let config = TrainingConfig::default();

    let (model, _) = train_head(HeadKind::Knn, &train, &train, &config)?;
    let report = evaluate(&model, &test, config.test_batch_size)?.with_context(split, config.seed);

    println!("overall {} (baseline {:.4})", report.overall_accuracy_display, report.baseline);
    for (name, row) in manifest.label_names().iter().zip(&report.confusion.counts) {
        println!("  {name:<8} {row:?}");
    }
    for format in ReportFormat::ALL {
        println!("wrote {}", emit_report(&report, format, out.as_ref())?.display());
    }
    Ok(())
}
