//! Extracts built-in embeddings for a folder of images, then shows the
//! second call being served from the cache.
//!
//!     cargo run --release --example extract_embeddings

use bottleneck::embedding::{get_or_compute, ProviderConfig};
use bottleneck::fixtures::write_image_fixtures;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let manifest = write_image_fixtures(dir.path(), 10, 48, 1)?;
    let provider = ProviderConfig::builtin(256, 0);
    let cache = dir.path().join("embeddings.emb");

    let (set, stats) = get_or_compute(&manifest, &provider, &cache)?;
    println!("first call:  {} computed, {} cached", stats.computed, stats.cached);
    let (again, stats) = get_or_compute(&manifest, &provider, &cache)?;
    println!("second call: {} computed, {} cached", stats.computed, stats.cached);
    assert_eq!(set, again);

    println!("tag {}", set.provider_tag);
    let first = set.entries.values().next().unwrap();
    println!("first vector starts {:?}", &first[..6]);
    Ok(())
}
