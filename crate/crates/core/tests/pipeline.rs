use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use bottleneck::dataset::{standard_splits, stratified_split, SplitConfig};
use bottleneck::embedding::{
    get_or_compute, get_or_compute_with, read_cache, save_cache, EmbeddingError, FileRasterSource, ProviderConfig, Raster,
    RasterSource,
};
use bottleneck::eval::report::to_json;
use bottleneck::eval::{evaluate, run_cell, run_sweep, ReportRef};
use bottleneck::fixtures::{write_image_fixtures, BlobSpec};
use bottleneck::heads::{train_head, HeadKind, LabeledEmbeddings, TrainedHead, TrainingConfig};

struct Counting(AtomicUsize);

impl RasterSource for Counting {
    fn load(&self, path: &Path) -> Result<Raster, String> {
        self.0.fetch_add(1, Ordering::SeqCst);
        FileRasterSource.load(path)
    }
}

#[test]
fn cache_is_reused_and_extends_incrementally() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_image_fixtures(dir.path(), 3, 24, 5).unwrap();
    let provider = ProviderConfig::builtin(32, 9);
    let cache = dir.path().join("c.emb");
    let source = Counting(AtomicUsize::new(0));

    let mut first_half = manifest.clone();
    first_half.samples.truncate(9);
    let (a, stats) = get_or_compute_with(&first_half, &provider, &cache, &source).unwrap();
    assert_eq!((stats.computed, stats.cached, a.len()), (9, 0, 9));

    let (b, stats) = get_or_compute_with(&manifest, &provider, &cache, &source).unwrap();
    assert_eq!((stats.computed, stats.cached), (9, 9));
    assert_eq!(source.0.load(Ordering::SeqCst), 18);

    let (c, stats) = get_or_compute_with(&manifest, &provider, &cache, &source).unwrap();
    assert_eq!(stats.computed, 0);
    assert_eq!(source.0.load(Ordering::SeqCst), 18);
    assert_eq!(b, c);
    for (id, v) in &a.entries {
        assert_eq!(b.get(id).unwrap(), v);
    }
}

#[test]
fn cache_from_another_provider_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_image_fixtures(dir.path(), 1, 16, 5).unwrap();
    let cache = dir.path().join("c.emb");
    get_or_compute(&manifest, &ProviderConfig::builtin(16, 1), &cache).unwrap();
    let err = get_or_compute(&manifest, &ProviderConfig::builtin(16, 2), &cache).unwrap_err();
    assert!(matches!(err, EmbeddingError::TagMismatch { .. }), "{err}");
}

#[test]
fn missing_image_names_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_image_fixtures(dir.path(), 1, 16, 5).unwrap();
    std::fs::remove_file(manifest.resolve_source(&manifest.samples[2])).unwrap();
    let err = get_or_compute(&manifest, &ProviderConfig::builtin(8, 0), &dir.path().join("c.emb")).unwrap_err();
    match err {
        EmbeddingError::UnreadableImage { sample_id, .. } => assert_eq!(sample_id, manifest.samples[2].sample_id),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn sixty_synthetic_images_extract_and_classify() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_image_fixtures(dir.path(), 10, 64, 7).unwrap();
    let cache = dir.path().join("c.emb");
    let (set, _) = get_or_compute(&manifest, &ProviderConfig::builtin(128, 0), &cache).unwrap();
    assert_eq!(set.len(), 60);
    assert!(set.entries.values().all(|v| v.len() == 128 && v.iter().all(|x| x.abs() <= 1.0)));
    assert_eq!(read_cache(&cache).unwrap(), set);

    let split = SplitConfig::new(0.5, 0.4, 3);
    let report = run_cell(&manifest, &set, &split, HeadKind::Knn, &TrainingConfig::default()).unwrap();
    assert!(report.overall_accuracy > 1.0 / 6.0, "{}", report.overall_accuracy);
}

#[test]
fn cache_and_models_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, set) = BlobSpec {
        per_class: 30,
        ..BlobSpec::default()
    }
    .generate();
    let path = dir.path().join("e.emb");
    save_cache(&set, &path).unwrap();
    let back = read_cache(&path).unwrap();
    for (id, v) in &set.entries {
        let w = back.get(id).unwrap();
        assert!(v.iter().zip(w.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    let data = LabeledEmbeddings::from_manifest(&set, &manifest).unwrap();
    let config = TrainingConfig {
        steps: 200,
        ..TrainingConfig::default()
    };
    for kind in HeadKind::ALL {
        let (model, _) = train_head(kind, &data, &data, &config).unwrap();
        let file = dir.path().join(format!("{kind}.hed"));
        model.save(&file).unwrap();
        let loaded = TrainedHead::load(&file).unwrap();
        assert_eq!(loaded.to_bytes().unwrap(), model.to_bytes().unwrap());
        assert_eq!(evaluate(&loaded, &data, -1).unwrap(), evaluate(&model, &data, -1).unwrap());
    }
}

#[test]
fn training_is_a_pure_function_of_seed() {
    let (manifest, set) = BlobSpec {
        per_class: 40,
        ..BlobSpec::default()
    }
    .generate();
    let parts = stratified_split(&manifest, &SplitConfig::new(0.6, 0.3, 1)).unwrap();
    let train = LabeledEmbeddings::from_ids(&set, &manifest, &parts.train_ids).unwrap();
    let val = LabeledEmbeddings::from_ids(&set, &manifest, &parts.validation_ids).unwrap();
    let config = TrainingConfig {
        steps: 300,
        ..TrainingConfig::default()
    };
    for kind in [HeadKind::Softmax, HeadKind::Svm] {
        let (a, ta) = train_head(kind, &train, &val, &config).unwrap();
        let (b, tb) = train_head(kind, &train, &val, &config).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        assert_eq!(ta, tb);
        let (c, _) = train_head(kind, &train, &val, &config.clone().with_seed(1)).unwrap();
        assert_ne!(a.to_bytes().unwrap(), c.to_bytes().unwrap(), "{kind}");
    }
}

#[test]
fn sweep_is_deterministic_and_complete() {
    let (manifest, set) = BlobSpec {
        per_class: 60,
        ..BlobSpec::default()
    }
    .generate();
    let config = TrainingConfig {
        steps: 300,
        ..TrainingConfig::default()
    };
    let splits = standard_splits(4);
    let a = run_sweep(&manifest, &set, &splits, &HeadKind::ALL, &config).unwrap();
    let b = run_sweep(&manifest, &set, &splits, &HeadKind::ALL, &config).unwrap();
    assert_eq!(to_json(ReportRef::Sweep(&a)).unwrap(), to_json(ReportRef::Sweep(&b)).unwrap());
    assert_eq!(a.cells.len(), 15);
    let order: Vec<(String, HeadKind)> = a.cells.iter().map(|c| (c.split.unwrap().label(), c.head)).collect();
    let expected: Vec<(String, HeadKind)> = splits
        .iter()
        .flat_map(|s| HeadKind::ALL.map(|h| (s.label(), h)))
        .collect();
    assert_eq!(order, expected);
    for cell in &a.cells {
        assert_eq!(cell.sample_count as u64, cell.confusion.total());
    }
}

#[test]
fn failing_cell_is_named() {
    let (manifest, set) = BlobSpec {
        per_class: 5,
        ..BlobSpec::default()
    }
    .generate();
    let config = TrainingConfig {
        steps: 10,
        knn_k: 50,
        ..TrainingConfig::default()
    };
    let err = run_sweep(&manifest, &set, &[SplitConfig::new(0.6, 0.3, 0)], &HeadKind::ALL, &config).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("knn") && msg.contains("60-30"), "{msg}");
}
