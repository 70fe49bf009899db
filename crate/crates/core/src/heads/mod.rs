//! Retrainable classifier heads over fixed embeddings.
//!
//! Three heads share one train/predict contract: multinomial softmax
//! regression, one-vs-rest linear SVM, and k-nearest-neighbours. The linear
//! heads are trained by plain mini-batch gradient descent at a fixed learning
//! rate; all sampling goes through [`SeededRng`], so training is a pure
//! function of the data and the [`TrainingConfig`].
//!
//! Every head breaks score ties towards the lowest class id.

pub mod knn;
pub mod objective;
pub mod serialize;
pub mod softmax;
pub mod svm;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetManifest;
use crate::embedding::{EmbeddingError, EmbeddingSet};
use crate::rng::SeededRng;

pub use knn::{predict_knn, train_knn, KnnModel};
pub use softmax::{predict_softmax, train_softmax, SoftmaxModel};
pub use svm::{predict_svm, train_svm, SvmModel};

/// Checkpoints are recorded every this many steps.
pub const TRACE_INTERVAL: usize = 100;

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("class {0} has no training samples")]
    EmptyClass(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },
    #[error("k = {k} exceeds the {available} training points")]
    KTooLarge { k: usize, available: usize },
    #[error("dimension mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("corrupt model file: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Softmax,
    Svm,
    Knn,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Softmax, HeadKind::Svm, HeadKind::Knn];

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Softmax => "softmax",
            HeadKind::Svm => "svm",
            HeadKind::Knn => "knn",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            HeadKind::Softmax => 0,
            HeadKind::Svm => 1,
            HeadKind::Knn => 2,
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = HeadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "softmax" => Ok(HeadKind::Softmax),
            "svm" => Ok(HeadKind::Svm),
            "knn" => Ok(HeadKind::Knn),
            other => Err(HeadError::InvalidConfig(format!(
                "unknown head `{other}` (expected softmax, svm or knn)"
            ))),
        }
    }
}

/// Optimisation and head hyperparameters.
///
/// The defaults are 4000 steps at learning rate 0.035 with train and
/// validation batches of 100, the whole test set per evaluation batch, and
/// k = 3 for the nearest-neighbour head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub train_batch_size: usize,
    pub validation_batch_size: usize,
    /// `-1` evaluates the whole test set in one batch.
    pub test_batch_size: i64,
    pub seed: u64,
    pub standardize_features: bool,
    pub svm_regularization: f64,
    pub knn_k: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            steps: 4000,
            learning_rate: 0.035,
            train_batch_size: 100,
            validation_batch_size: 100,
            test_batch_size: -1,
            seed: 0,
            standardize_features: false,
            svm_regularization: 1e-4,
            knn_k: 3,
        }
    }
}

impl TrainingConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), HeadError> {
        let bad = |m: &str| Err(HeadError::InvalidConfig(m.to_string()));
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.train_batch_size == 0 || self.validation_batch_size == 0 {
            return bad("batch sizes must be at least 1");
        }
        if self.test_batch_size == 0 || self.test_batch_size < -1 {
            return bad("test_batch_size must be -1 or at least 1");
        }
        if !(self.svm_regularization > 0.0 && self.svm_regularization.is_finite()) {
            return bad("svm_regularization must be positive");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be at least 1");
        }
        Ok(())
    }
}

/// Embeddings paired with class labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    dim: usize,
    num_classes: usize,
    ids: Vec<String>,
    labels: Vec<usize>,
    features: Vec<f32>,
}

impl LabeledEmbeddings {
    pub fn new(dim: usize, num_classes: usize) -> Self {
        Self {
            dim,
            num_classes,
            ids: Vec::new(),
            labels: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, x: &[f32], label: usize) -> Result<(), HeadError> {
        if x.len() != self.dim {
            return Err(HeadError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if label >= self.num_classes {
            return Err(HeadError::LabelOutOfRange {
                label,
                num_classes: self.num_classes,
            });
        }
        self.ids.push(id.into());
        self.labels.push(label);
        self.features.extend_from_slice(x);
        Ok(())
    }

    /// Gathers the listed samples, in the given order.
    pub fn from_ids(set: &EmbeddingSet, manifest: &DatasetManifest, ids: &[String]) -> Result<Self, HeadError> {
        let index = manifest.index();
        let mut out = Self::new(set.dim, manifest.num_classes());
        for id in ids {
            let sample = index
                .get(id.as_str())
                .map(|&i| &manifest.samples[i])
                .ok_or_else(|| EmbeddingError::MissingSample(id.clone()))?;
            let v = set.get(id).ok_or_else(|| EmbeddingError::MissingSample(id.clone()))?;
            out.push(id.clone(), v, sample.label)?;
        }
        Ok(out)
    }

    pub fn from_manifest(set: &EmbeddingSet, manifest: &DatasetManifest) -> Result<Self, HeadError> {
        let ids: Vec<String> = manifest.samples.iter().map(|s| s.sample_id.clone()).collect();
        Self::from_ids(set, manifest, &ids)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub(crate) fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub(crate) fn require_all_classes(&self) -> Result<(), HeadError> {
        if self.is_empty() {
            return Err(HeadError::EmptyTrainingSet);
        }
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(c) => Err(HeadError::EmptyClass(c)),
            None => Ok(()),
        }
    }
}

/// Predicted label plus per-class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub scores: Vec<f64>,
}

impl Prediction {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        Self {
            label: argmax_lowest(&scores),
            scores,
        }
    }
}

/// Index of the largest score, the lowest index among ties.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    /// Objective over the whole training set after `step` updates.
    pub train_objective: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub checkpoints: Vec<Checkpoint>,
}

/// A fitted head of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedHead {
    Softmax(SoftmaxModel),
    Svm(SvmModel),
    Knn(KnnModel),
}

impl TrainedHead {
    pub fn kind(&self) -> HeadKind {
        match self {
            TrainedHead::Softmax(_) => HeadKind::Softmax,
            TrainedHead::Svm(_) => HeadKind::Svm,
            TrainedHead::Knn(_) => HeadKind::Knn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedHead::Softmax(m) => m.dim(),
            TrainedHead::Svm(m) => m.dim(),
            TrainedHead::Knn(m) => m.dim(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            TrainedHead::Softmax(m) => m.num_classes(),
            TrainedHead::Svm(m) => m.num_classes(),
            TrainedHead::Knn(m) => m.num_classes(),
        }
    }

    pub fn predict(&self, x: &[f32]) -> Result<Prediction, HeadError> {
        match self {
            TrainedHead::Softmax(m) => predict_softmax(m, x),
            TrainedHead::Svm(m) => predict_svm(m, x),
            TrainedHead::Knn(m) => predict_knn(m, x),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, HeadError> {
        serialize::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HeadError> {
        serialize::decode(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), HeadError> {
        let bytes = self.to_bytes()?;
        crate::io::write_atomic(path, &bytes).map_err(|source| HeadError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, HeadError> {
        let bytes = std::fs::read(path).map_err(|source| HeadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

/// Trains the requested head. kNN ignores `validation` and records no trace.
pub fn train_head(
    kind: HeadKind,
    train: &LabeledEmbeddings,
    validation: &LabeledEmbeddings,
    config: &TrainingConfig,
) -> Result<(TrainedHead, TrainingTrace), HeadError> {
    match kind {
        HeadKind::Softmax => train_softmax(train, validation, config).map(|(m, t)| (TrainedHead::Softmax(m), t)),
        HeadKind::Svm => train_svm(train, config).map(|(m, t)| (TrainedHead::Svm(m), t)),
        HeadKind::Knn => train_knn(train, config).map(|m| (TrainedHead::Knn(m), TrainingTrace::default())),
    }
}

/// Mini-batch index sampler.
///
/// * `batch < n`: `batch` distinct indices by a partial Fisher-Yates pass over
///   a persistent index array (`for i in 0..batch { swap(i, i + below(n - i)) }`).
/// * `batch == n`: the whole set in order (full-batch descent, no draws).
/// * `batch > n`: `batch` draws of `below(n)`, with replacement.
pub(crate) struct BatchSampler {
    order: Vec<usize>,
    batch: usize,
    rng: SeededRng,
    current: Vec<usize>,
}

impl BatchSampler {
    pub(crate) fn new(n: usize, batch: usize, seed: u64) -> Self {
        Self {
            order: (0..n).collect(),
            batch,
            rng: SeededRng::new(seed),
            current: Vec::with_capacity(batch),
        }
    }

    pub(crate) fn next_batch(&mut self) -> &[usize] {
        let n = self.order.len();
        self.current.clear();
        if self.batch < n {
            for i in 0..self.batch {
                let j = i + self.rng.index(n - i);
                self.order.swap(i, j);
            }
            self.current.extend_from_slice(&self.order[..self.batch]);
        } else if self.batch == n {
            self.current.extend(0..n);
        } else {
            for _ in 0..self.batch {
                let j = self.rng.index(n);
                self.current.push(j);
            }
        }
        &self.current
    }
}

/// Per-feature mean and inverse standard deviation of a training set.
/// Constant features keep unit scale.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(data: &LabeledEmbeddings) -> Self {
        let (n, d) = (data.len() as f64, data.dim());
        let mut mean = vec![0.0; d];
        for i in 0..data.len() {
            for (m, &x) in mean.iter_mut().zip(data.row(i)) {
                *m += f64::from(x);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.len() {
            for ((v, &x), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                let c = f64::from(x) - m;
                *v += c * c;
            }
        }
        let inv_std = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    pub(crate) fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            inv_std: vec![1.0; d],
        }
    }

    /// Row-major f64 copy of the data with the transform applied.
    pub(crate) fn transform(&self, data: &LabeledEmbeddings) -> Vec<f64> {
        let d = data.dim();
        data.features()
            .iter()
            .enumerate()
            .map(|(i, &x)| (f64::from(x) - self.mean[i % d]) * self.inv_std[i % d])
            .collect()
    }

    /// Rewrites linear parameters trained on standardised inputs so they act
    /// on raw inputs: `w'_j = w_j / s_j`, `b' = b - sum_j w_j m_j / s_j`.
    pub(crate) fn fold(&self, weights: &mut [f64], bias: &mut [f64]) {
        let d = self.mean.len();
        for (row, b) in weights.chunks_exact_mut(d).zip(bias.iter_mut()) {
            for ((w, s), m) in row.iter_mut().zip(&self.inv_std).zip(&self.mean) {
                *w *= s;
                *b -= *w * m;
            }
        }
    }
}

pub(crate) fn gather_rows(x: &[f64], dim: usize, rows: &[usize], out: &mut Vec<f64>) {
    out.clear();
    for &r in rows {
        out.extend_from_slice(&x[r * dim..(r + 1) * dim]);
    }
}

/// Accuracy of `predict` on a `batch`-sized sample of `data` drawn without
/// replacement (or the whole set when it is smaller).
pub(crate) fn sampled_accuracy(
    data: &LabeledEmbeddings,
    batch: usize,
    rng: &mut SeededRng,
    mut predict: impl FnMut(&[f32]) -> usize,
) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let take = batch.min(n);
    if take < n {
        for i in 0..take {
            let j = i + rng.index(n - i);
            order.swap(i, j);
        }
    }
    let correct = order[..take]
        .iter()
        .filter(|&&i| predict(data.row(i)) == data.label(i))
        .count();
    Some(correct as f64 / take as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reported_hyperparameters() {
        let c = TrainingConfig::default();
        assert_eq!(c.steps, 4000);
        assert_eq!(c.learning_rate, 0.035);
        assert_eq!(c.train_batch_size, 100);
        assert_eq!(c.validation_batch_size, 100);
        assert_eq!(c.test_batch_size, -1);
        assert_eq!(c.knn_k, 3);
        assert!(!c.standardize_features);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let base = TrainingConfig::default();
        for c in [
            TrainingConfig { steps: 0, ..base.clone() },
            TrainingConfig { learning_rate: 0.0, ..base.clone() },
            TrainingConfig { train_batch_size: 0, ..base.clone() },
            TrainingConfig { test_batch_size: -2, ..base.clone() },
            TrainingConfig { test_batch_size: 0, ..base.clone() },
            TrainingConfig { svm_regularization: 0.0, ..base.clone() },
            TrainingConfig { knn_k: 0, ..base.clone() },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax_lowest(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax_lowest(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(argmax_lowest(&[0.0; 6]), 0);
    }

    #[test]
    fn head_kind_parses() {
        assert_eq!("SVM".parse::<HeadKind>().unwrap(), HeadKind::Svm);
        assert!("tree".parse::<HeadKind>().is_err());
        for k in HeadKind::ALL {
            assert_eq!(k.as_str().parse::<HeadKind>().unwrap(), k);
        }
    }

    #[test]
    fn sampler_modes() {
        let mut s = BatchSampler::new(10, 4, 1);
        let b = s.next_batch().to_vec();
        let mut u = b.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), 4);

        let mut full = BatchSampler::new(5, 5, 1);
        assert_eq!(full.next_batch(), &[0, 1, 2, 3, 4]);

        let mut over = BatchSampler::new(3, 7, 1);
        let b = over.next_batch();
        assert_eq!(b.len(), 7);
        assert!(b.iter().all(|&i| i < 3));
    }

    #[test]
    fn labeled_embeddings_check_shape() {
        let mut d = LabeledEmbeddings::new(2, 2);
        d.push("a", &[1.0, 2.0], 1).unwrap();
        assert!(matches!(d.push("b", &[1.0], 0), Err(HeadError::DimensionMismatch { .. })));
        assert!(matches!(d.push("c", &[1.0, 1.0], 2), Err(HeadError::LabelOutOfRange { .. })));
        assert!(matches!(d.require_all_classes(), Err(HeadError::EmptyClass(0))));
    }

    #[test]
    fn standardizer_fold_matches_transformed_logits() {
        let mut d = LabeledEmbeddings::new(3, 2);
        d.push("a", &[1.0, 5.0, 2.0], 0).unwrap();
        d.push("b", &[3.0, 1.0, 2.0], 1).unwrap();
        d.push("c", &[2.0, 0.0, 2.0], 1).unwrap();
        let st = Standardizer::fit(&d);
        let z = st.transform(&d);
        let w = vec![0.3, -1.2, 0.7, 2.0, 0.1, -0.4];
        let b = vec![0.5, -0.25];
        let (mut wf, mut bf) = (w.clone(), b.clone());
        st.fold(&mut wf, &mut bf);
        for i in 0..3 {
            for c in 0..2 {
                let std_logit: f64 = (0..3).map(|j| w[c * 3 + j] * z[i * 3 + j]).sum::<f64>() + b[c];
                let raw_logit: f64 = (0..3).map(|j| wf[c * 3 + j] * f64::from(d.row(i)[j])).sum::<f64>() + bf[c];
                assert!((std_logit - raw_logit).abs() < 1e-12);
            }
        }
    }
}
