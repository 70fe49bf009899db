//! Accuracy, confusion matrices, split x head sweeps, and report files.

mod confusion;
pub mod report;
mod sweep;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, SplitConfig};
use crate::embedding::EmbeddingError;
use crate::heads::{HeadError, HeadKind, LabeledEmbeddings, TrainedHead};

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use report::{emit_report, ReportFormat, ReportRef};
pub use sweep::{cell_seed, run_cell, run_sweep, run_sweep_with_progress, SweepEvent, SweepReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truths} truths but {predictions} predictions")]
    LengthMismatch { truths: usize, predictions: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("invalid test batch size {0} (use -1 or a positive size)")]
    InvalidBatchSize(i64),
    #[error("head predicts {head} classes but the data has {data}")]
    ClassCountMismatch { head: usize, data: usize },
    #[error("sweep needs at least one split and one head")]
    EmptyGrid,
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("sweep cell (split {split}, head {head}) failed: {source}")]
    Cell {
        split: String,
        head: HeadKind,
        #[source]
        source: Box<EvalError>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Two-decimal rendering, rounding half up.
pub fn display2(v: f64) -> String {
    format!("{:.2}", ((v * 100.0) + 0.5 + 1e-9).floor() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// The split this report was evaluated on, when known.
    pub split: Option<SplitConfig>,
    pub head: HeadKind,
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    #[serde(flatten)]
    pub confusion: ConfusionMatrix,
    /// `1 / K`, the accuracy of guessing uniformly.
    pub baseline: f64,
    pub sample_count: usize,
    pub training_seed: Option<u64>,
    pub overall_accuracy_display: String,
    pub per_class_accuracy_display: Vec<String>,
}

impl EvaluationReport {
    pub fn from_confusion(head: HeadKind, confusion: ConfusionMatrix) -> Self {
        let overall_accuracy = confusion.accuracy();
        let per_class_accuracy = confusion.per_class_accuracy();
        Self {
            split: None,
            head,
            overall_accuracy,
            overall_accuracy_display: display2(overall_accuracy),
            per_class_accuracy_display: per_class_accuracy.iter().map(|&v| display2(v)).collect(),
            per_class_accuracy,
            baseline: 1.0 / confusion.num_classes() as f64,
            sample_count: confusion.total() as usize,
            training_seed: None,
            confusion,
        }
    }

    pub fn with_context(mut self, split: SplitConfig, training_seed: u64) -> Self {
        self.split = Some(split);
        self.training_seed = Some(training_seed);
        self
    }

    pub fn beats_baseline(&self) -> bool {
        self.overall_accuracy > self.baseline
    }
}

/// Predicts every test sample once and tabulates the results.
///
/// `test_batch_size` of -1 uses one batch; batching never changes results.
pub fn evaluate(head: &TrainedHead, test: &LabeledEmbeddings, test_batch_size: i64) -> Result<EvaluationReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let batch = match test_batch_size {
        -1 => test.len(),
        b if b >= 1 => b as usize,
        b => return Err(EvalError::InvalidBatchSize(b)),
    };
    if head.dim() != test.dim() {
        return Err(HeadError::DimensionMismatch {
            expected: head.dim(),
            found: test.dim(),
        }
        .into());
    }
    if head.num_classes() != test.num_classes() {
        return Err(EvalError::ClassCountMismatch {
            head: head.num_classes(),
            data: test.num_classes(),
        });
    }

    let mut predictions = Vec::with_capacity(test.len());
    let indices: Vec<usize> = (0..test.len()).collect();
    for chunk in indices.chunks(batch) {
        let labels = chunk
            .par_iter()
            .map(|&i| head.predict(test.row(i)).map(|p| p.label))
            .collect::<Result<Vec<_>, _>>()?;
        predictions.extend(labels);
    }
    let confusion = confusion_matrix(test.labels(), &predictions, test.num_classes())?;
    Ok(EvaluationReport::from_confusion(head.kind(), confusion))
}
