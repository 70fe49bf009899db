//! Synthetic stand-ins for the cassava datasets.
//!
//! The field images are not distributed, so tests, examples and the CLI run
//! on generated data with the same six-class layout: manifests with the
//! original per-class counts, Gaussian-blob embeddings, and small PNG images
//! whose classes differ in colour and texture.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{DatasetManifest, Sample};
use crate::embedding::{EmbeddingSet, Raster};
use crate::rng::{derive_seed, SeededRng};

/// CBSD, CMD, brown leaf spot, green mite, red mite, healthy.
pub const CLASS_NAMES: [&str; 6] = ["cbsd", "cmd", "bls", "gmd", "rmd", "healthy"];

/// Whole-leaf dataset: 2,756 images. Healthy holds the remainder after the
/// five named classes.
pub const ORIGINAL_COUNTS: [usize; 6] = [398, 388, 386, 309, 415, 860];

/// Leaflet dataset: 2,500 images per class.
pub const LEAFLET_PER_CLASS: usize = 2500;

/// Manifest with `counts[c]` samples of class `c`, sources set to embedding
/// keys equal to the sample ids.
pub fn count_manifest(name: &str, counts: &[usize]) -> DatasetManifest {
    assert!(counts.len() <= CLASS_NAMES.len(), "at most six classes");
    let samples = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| {
            (0..n).map(move |i| {
                let id = format!("{}_{i:05}", CLASS_NAMES[c]);
                Sample {
                    source: id.clone(),
                    sample_id: id,
                    label: c,
                }
            })
        })
        .collect();
    DatasetManifest::new(name, CLASS_NAMES[..counts.len()].iter().copied(), samples)
        .expect("generated manifest is valid")
}

pub fn original_manifest() -> DatasetManifest {
    count_manifest("original", &ORIGINAL_COUNTS)
}

pub fn leaflet_manifest() -> DatasetManifest {
    count_manifest("leaflet", &[LEAFLET_PER_CLASS; 6])
}

/// Isotropic Gaussian blobs, class `c` centred at `separation * e_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    /// The benchmark task: 6 classes x 300, D = 32, centres 5 sigma along
    /// distinct axes. Nearest-centre (Bayes) accuracy is about 0.999.
    fn default() -> Self {
        Self {
            classes: 6,
            per_class: 300,
            dim: 32,
            separation: 5.0,
            sigma: 1.0,
            seed: 2017,
        }
    }
}

impl BlobSpec {
    pub fn mean(&self, class: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        m[class] = self.separation;
        m
    }

    /// Draws one point of `class` from `rng`.
    pub fn draw(&self, class: usize, rng: &mut SeededRng) -> Vec<f32> {
        self.mean(class)
            .into_iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                (m + self.sigma * z) as f32
            })
            .collect()
    }

    pub fn tag(&self) -> String {
        format!(
            "blobs/v1;k={};n={};dim={};sep={};sigma={};seed={}",
            self.classes, self.per_class, self.dim, self.separation, self.sigma, self.seed
        )
    }

    /// Manifest plus matching embeddings.
    pub fn generate(&self) -> (DatasetManifest, EmbeddingSet) {
        assert!(self.classes >= 1 && self.classes <= CLASS_NAMES.len());
        assert!(self.dim >= self.classes, "need one axis per class centre");
        let manifest = count_manifest("blobs", &vec![self.per_class; self.classes]);
        let mut rng = SeededRng::new(self.seed);
        let mut set = EmbeddingSet::new(self.dim, self.tag());
        for s in &manifest.samples {
            set.insert(s.sample_id.clone(), self.draw(s.label, &mut rng))
                .expect("finite draws");
        }
        (manifest, set)
    }
}

const PALETTE: [[i32; 3]; 6] = [
    [196, 186, 70],  // yellowed veins
    [150, 190, 90],  // pale mosaic
    [120, 80, 40],   // brown spots
    [200, 210, 190], // white scratches
    [180, 80, 40],   // rust
    [40, 130, 50],   // green
];

/// A `size x size` leaf-like image for `class`; `index` and `seed` vary
/// the texture phase, brightness and per-pixel noise.
pub fn synthetic_image(class: usize, index: usize, seed: u64, size: usize) -> Raster {
    let mut rng = SeededRng::new(derive_seed(seed, &[class as u64, index as u64]));
    let phase = rng.index(8);
    let shift = rng.index(31) as i32 - 15;
    let base = PALETTE[class % PALETTE.len()];
    let background = [40, 110, 45];
    let mut noise = Vec::with_capacity(size * size);
    for _ in 0..size * size {
        noise.push(rng.index(21) as i32 - 10);
    }
    Raster::from_fn(size, size, |x, y| {
        let (u, v) = (x + phase, y + phase);
        let on = match class % 6 {
            0 => (v / 2) % 3 == 0,
            1 => ((u / 4) + (v / 4)) % 2 == 0,
            2 => ((u % 8) as i32 - 4).pow(2) + ((v % 8) as i32 - 4).pow(2) < 6,
            3 => (u + 2 * v) % 7 == 0,
            4 => u % 3 != 0,
            _ => true,
        };
        let colour = if on { base } else { background };
        let n = noise[y * size + x];
        let px = |c: i32| (c + shift + n).clamp(0, 255) as u8;
        [px(colour[0]), px(colour[1]), px(colour[2])]
    })
}

/// Writes `per_class` PNGs per class under `dir/images/` plus
/// `dir/manifest.txt`, and returns the loaded manifest.
pub fn write_image_fixtures(dir: &Path, per_class: usize, size: usize, seed: u64) -> std::io::Result<DatasetManifest> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images)?;
    let mut samples = Vec::new();
    for (c, name) in CLASS_NAMES.iter().enumerate() {
        for i in 0..per_class {
            let id = format!("{name}_{i:03}");
            let rel = format!("images/{id}.png");
            let raster = synthetic_image(c, i, seed, size);
            let img = image::RgbImage::from_raw(size as u32, size as u32, raster.data().to_vec())
                .expect("buffer matches size");
            img.save(dir.join(&rel)).map_err(std::io::Error::other)?;
            samples.push(Sample {
                sample_id: id,
                source: rel,
                label: c,
            });
        }
    }
    let mut manifest = DatasetManifest::new("synthetic-images", CLASS_NAMES, samples).expect("valid manifest");
    std::fs::write(dir.join("manifest.txt"), manifest.to_text())?;
    manifest.base_dir = Some(dir.to_path_buf());
    Ok(manifest)
}

/// Writes a blob dataset as `manifest.txt` plus an `EMB1` embedding file.
pub fn write_blob_fixtures(dir: &Path, spec: &BlobSpec) -> std::io::Result<(DatasetManifest, EmbeddingSet)> {
    std::fs::create_dir_all(dir)?;
    let (mut manifest, set) = spec.generate();
    std::fs::write(dir.join("manifest.txt"), manifest.to_text())?;
    crate::embedding::save_cache(&set, &dir.join("embeddings.emb")).map_err(std::io::Error::other)?;
    manifest.base_dir = Some(dir.to_path_buf());
    Ok((manifest, set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::class_distribution;

    #[test]
    fn original_counts_total() {
        let m = original_manifest();
        assert_eq!(m.samples.len(), 2756);
        let d = class_distribution(&m);
        assert_eq!(d[&0], 398);
        assert_eq!(d[&4], 415);
    }

    #[test]
    fn leaflet_is_balanced() {
        let d = class_distribution(&leaflet_manifest());
        assert!(d.values().all(|&c| c == 2500));
        assert_eq!(d.values().sum::<usize>(), 15_000);
    }

    #[test]
    fn blobs_are_reproducible() {
        let spec = BlobSpec {
            per_class: 4,
            dim: 8,
            ..BlobSpec::default()
        };
        let (m, a) = spec.generate();
        let (_, b) = spec.generate();
        assert_eq!(a, b);
        assert_eq!(a.len(), m.samples.len());
        assert_eq!(a.len(), 24);
    }

    #[test]
    fn images_differ_by_class() {
        let a = synthetic_image(0, 0, 1, 16);
        let b = synthetic_image(5, 0, 1, 16);
        assert_ne!(a, b);
        assert_eq!(a, synthetic_image(0, 0, 1, 16));
    }
}
