//! Writes the synthetic datasets to disk so the CLI can be tried on them.
//!
//!     cargo run --example make_fixtures -- /tmp/fixtures
//!
//! Produces `blobs/` (manifest + precomputed embeddings) and `images/`
//! (manifest + 64x64 PNGs), plus a `run.toml` for each.

use std::path::PathBuf;

use bottleneck::fixtures::{write_blob_fixtures, write_image_fixtures, BlobSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));

    let blobs = root.join("blobs");
    let (manifest, set) = write_blob_fixtures(&blobs, &BlobSpec::default())?;
    std::fs::write(
        blobs.join("run.toml"),
        "manifest = \"manifest.txt\"\nout = \"out\"\nseed = 42\n\n[provider]\nkind = \"precomputed\"\nsource = \"embeddings.emb\"\n",
    )?;
    println!("{}: {} samples, dim {}", blobs.display(), manifest.samples.len(), set.dim);

    let images = root.join("images");
    let manifest = write_image_fixtures(&images, 10, 64, 7)?;
    std::fs::write(
        images.join("run.toml"),
        "manifest = \"manifest.txt\"\nout = \"out\"\nseed = 42\nsplits = [\"50-40\"]\n\n[provider]\nkind = \"builtin\"\ndim = 128\nseed = 0\n\n[training]\nsteps = 500\n",
    )?;
    println!("{}: {} images", images.display(), manifest.samples.len());
    Ok(())
}
