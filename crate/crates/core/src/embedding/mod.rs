//! Fixed-length embeddings ("bottleneck features") for manifest samples.
//!
//! A provider is either the built-in deterministic extractor or a file of
//! vectors exported from a real backbone. [`get_or_compute`] materialises the
//! vectors for a manifest and keeps them in an `EMB1` cache so that heads can
//! be retrained without touching images again.

pub mod cache;
pub mod extractor;

use std::collections::BTreeMap;
use std::ops::Deref;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{DatasetManifest, Sample};
pub use cache::{read_cache, save_cache};
pub use extractor::{BuiltinExtractor, Raster};

/// Default embedding width, the penultimate layer width of Inception v3.
pub const DEFAULT_DIM: usize = 2048;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image is {width}x{height}, both sides must be at least 8")]
    ImageTooSmall { width: usize, height: usize },
    #[error("expected 3 colour channels, got {0}")]
    ChannelCount(usize),
    #[error("raster buffer has {found} bytes, expected {expected}")]
    RasterShape { expected: usize, found: usize },
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt embedding file: {0}")]
    Format(String),
    #[error("sample id `{0}` is longer than 65535 bytes")]
    IdTooLong(String),
    #[error("no embedding for sample `{0}`")]
    MissingSample(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in embedding for `{0}`")]
    NonFinite(String),
    #[error("cache was built by `{cached}` but `{requested}` was requested")]
    TagMismatch { cached: String, requested: String },
    #[error("cannot read image for sample `{sample_id}` ({path}): {reason}")]
    UnreadableImage {
        sample_id: String,
        path: PathBuf,
        reason: String,
    },
}

impl EmbeddingError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl Deref for EmbeddingVector {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.0
    }
}

impl From<Vec<f32>> for EmbeddingVector {
    fn from(v: Vec<f32>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub dim: usize,
    pub entries: BTreeMap<String, EmbeddingVector>,
    pub provider_tag: String,
}

impl EmbeddingSet {
    pub fn new(dim: usize, provider_tag: impl Into<String>) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
            provider_tag: provider_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.entries.get(id)
    }

    pub fn insert(&mut self, id: impl Into<String>, v: impl Into<EmbeddingVector>) -> Result<(), EmbeddingError> {
        let id = id.into();
        let v = v.into();
        if v.dim() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite(id));
        }
        self.entries.insert(id, v);
        Ok(())
    }

    /// Restricts the set to the manifest's samples, failing on the first
    /// sample (in manifest order) without a vector.
    pub fn covering(&self, manifest: &DatasetManifest) -> Result<EmbeddingSet, EmbeddingError> {
        let mut out = EmbeddingSet::new(self.dim, self.provider_tag.clone());
        for s in &manifest.samples {
            let v = self
                .entries
                .get(&s.sample_id)
                .ok_or_else(|| EmbeddingError::MissingSample(s.sample_id.clone()))?;
            out.entries.insert(s.sample_id.clone(), v.clone());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderConfig {
    /// The deterministic built-in extractor.
    Builtin { dim: usize, seed: u64 },
    /// Vectors read from an `EMB1` file. `dim`, when set, must match the file.
    Precomputed { source_path: PathBuf, dim: Option<usize> },
}

impl ProviderConfig {
    pub fn builtin(dim: usize, seed: u64) -> Self {
        Self::Builtin { dim, seed }
    }

    pub fn precomputed(source_path: impl Into<PathBuf>) -> Self {
        Self::Precomputed {
            source_path: source_path.into(),
            dim: None,
        }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        match self {
            Self::Builtin { dim: 0, .. } | Self::Precomputed { dim: Some(0), .. } => {
                Err(EmbeddingError::InvalidConfig("dim must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Tag for built-in providers; `None` for precomputed files, whose tag is
    /// whatever the file carries.
    pub fn builtin_tag(&self) -> Option<String> {
        match self {
            Self::Builtin { dim, seed } => Some(format!("builtin-area16-hist32-tanh/v1;dim={dim};seed={seed}")),
            Self::Precomputed { .. } => None,
        }
    }
}

/// Runs the built-in extractor on one image.
pub fn extract_embedding(image: &Raster, config: &ProviderConfig) -> Result<EmbeddingVector, EmbeddingError> {
    config.validate()?;
    match config {
        ProviderConfig::Builtin { dim, seed } => BuiltinExtractor::new(*dim, *seed)?.extract(image),
        ProviderConfig::Precomputed { .. } => Err(EmbeddingError::InvalidConfig(
            "extract_embedding needs the builtin provider".into(),
        )),
    }
}

/// Loads a precomputed `EMB1` file and restricts it to the manifest's samples.
pub fn load_precomputed(config: &ProviderConfig, manifest: &DatasetManifest) -> Result<EmbeddingSet, EmbeddingError> {
    config.validate()?;
    let ProviderConfig::Precomputed { source_path, dim } = config else {
        return Err(EmbeddingError::InvalidConfig(
            "load_precomputed needs the precomputed provider".into(),
        ));
    };
    let set = read_cache(source_path)?;
    if let Some(expected) = dim {
        if *expected != set.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: *expected,
                found: set.dim,
            });
        }
    }
    if let Some((id, _)) = set.entries.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
        return Err(EmbeddingError::NonFinite(id.clone()));
    }
    set.covering(manifest)
}

/// Where images come from; swapped out in tests to observe reads.
pub trait RasterSource: Sync {
    fn load(&self, path: &Path) -> Result<Raster, String>;
}

/// Decodes image files from disk (PNG).
#[derive(Debug, Default, Clone, Copy)]
pub struct FileRasterSource;

impl RasterSource for FileRasterSource {
    fn load(&self, path: &Path) -> Result<Raster, String> {
        let img = image::open(path).map_err(|e| e.to_string())?;
        Ok(img.to_rgb8().into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub cached: usize,
    pub computed: usize,
}

pub fn get_or_compute(
    manifest: &DatasetManifest,
    config: &ProviderConfig,
    cache_path: &Path,
) -> Result<(EmbeddingSet, CacheStats), EmbeddingError> {
    get_or_compute_with(manifest, config, cache_path, &FileRasterSource)
}

/// Returns one vector per manifest sample, serving what it can from the
/// cache at `cache_path` and extracting (then caching) the rest.
///
/// A precomputed provider never touches the cache path; its source file is
/// the cache.
pub fn get_or_compute_with(
    manifest: &DatasetManifest,
    config: &ProviderConfig,
    cache_path: &Path,
    source: &dyn RasterSource,
) -> Result<(EmbeddingSet, CacheStats), EmbeddingError> {
    config.validate()?;
    let (dim, seed) = match config {
        ProviderConfig::Precomputed { .. } => {
            let set = load_precomputed(config, manifest)?;
            let stats = CacheStats {
                cached: set.len(),
                computed: 0,
            };
            return Ok((set, stats));
        }
        ProviderConfig::Builtin { dim, seed } => (*dim, *seed),
    };
    let tag = config.builtin_tag().expect("builtin");

    let mut cache = if cache_path.exists() {
        let existing = read_cache(cache_path)?;
        if existing.provider_tag != tag {
            return Err(EmbeddingError::TagMismatch {
                cached: existing.provider_tag,
                requested: tag,
            });
        }
        existing
    } else {
        EmbeddingSet::new(dim, tag)
    };

    let missing: Vec<&Sample> = manifest
        .samples
        .iter()
        .filter(|s| !cache.entries.contains_key(&s.sample_id))
        .collect();
    let stats = CacheStats {
        cached: manifest.samples.len() - missing.len(),
        computed: missing.len(),
    };

    if !missing.is_empty() {
        let extractor = BuiltinExtractor::new(dim, seed)?;
        let results: Vec<Result<EmbeddingVector, EmbeddingError>> = missing
            .par_iter()
            .map(|s| {
                let path = manifest.resolve_source(s);
                let unreadable = |reason: String| EmbeddingError::UnreadableImage {
                    sample_id: s.sample_id.clone(),
                    path: path.clone(),
                    reason,
                };
                let raster = source.load(&path).map_err(unreadable)?;
                extractor.extract(&raster).map_err(|e| unreadable(e.to_string()))
            })
            .collect();
        for (s, r) in missing.iter().zip(results) {
            cache.insert(s.sample_id.clone(), r?)?;
        }
        save_cache(&cache, cache_path)?;
    }

    Ok((cache.covering(manifest)?, stats))
}
