//! Looks inside a kNN prediction: the neighbour list and the vote fractions.
//!
//!     cargo run --example knn_neighbours

use bottleneck::fixtures::BlobSpec;
use bottleneck::heads::{predict_knn, KnnModel, LabeledEmbeddings};
use bottleneck::rng::SeededRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BlobSpec {
        per_class: 40,
        sigma: 3.0,
        ..BlobSpec::default()
    };
    let (manifest, embeddings) = spec.generate();
    let model = KnnModel::new(5, LabeledEmbeddings::from_manifest(&embeddings, &manifest)?)?;

    let mut rng = SeededRng::new(99);
    for class in 0..spec.classes {
        let query = spec.draw(class, &mut rng);
        let neighbours = model.neighbours(&query)?;
        let refs = model.references();
        let ids: Vec<&str> = neighbours.iter().map(|&i| refs.id(i)).collect();
        let p = predict_knn(&model, &query)?;
        println!("true {class} -> predicted {} votes {:?}\n  {:?}", p.label, p.scores, ids);
    }
    Ok(())
}
