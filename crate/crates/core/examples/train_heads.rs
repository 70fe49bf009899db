//! Trains each head on one split of the blob dataset, prints the training
//! trace, and checks a saved model reloads to identical predictions.
//!
//!     cargo run --release --example train_heads

use bottleneck::dataset::{stratified_split, SplitConfig};
use bottleneck::fixtures::BlobSpec;
use bottleneck::heads::{train_head, HeadKind, LabeledEmbeddings, TrainedHead, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (manifest, embeddings) = BlobSpec::default().generate();
    let parts = stratified_split(&manifest, &SplitConfig::new(0.6, 0.3, 1))?;
    let train = LabeledEmbeddings::from_ids(&embeddings, &manifest, &parts.train_ids)?;
    let validation = LabeledEmbeddings::from_ids(&embeddings, &manifest, &parts.validation_ids)?;
    let test = LabeledEmbeddings::from_ids(&embeddings, &manifest, &parts.test_ids)?;
    let config = TrainingConfig {
        steps: 1000,
        ..TrainingConfig::default()
    };

    let dir = tempfile::tempdir()?;
    for kind in HeadKind::ALL {
        let (model, trace) = train_head(kind, &train, &validation, &config)?;
        println!("{kind}");
        for c in trace.checkpoints.iter().step_by(3) {
            println!("  step {:>5} objective {:.5} validation {:?}", c.step, c.train_objective, c.validation_accuracy);
        }
        let correct = (0..test.len())
            .filter(|&i| model.predict(test.row(i)).map(|p| p.label == test.label(i)).unwrap_or(false))
            .count();
        println!("  test accuracy {:.4}", correct as f64 / test.len() as f64);

        let path = dir.path().join(format!("{kind}.hed"));
        model.save(&path)?;
        let reloaded = TrainedHead::load(&path)?;
        for i in 0..test.len() {
            assert_eq!(reloaded.predict(test.row(i))?, model.predict(test.row(i))?);
        }
    }
    Ok(())
}
