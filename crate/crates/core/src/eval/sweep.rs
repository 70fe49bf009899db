//! The split x head grid.
//!
//! Every cell splits the data with its `SplitConfig` (so all heads in a row
//! see the same partition), trains with seed
//! `derive_seed(config.seed, [split_index, head_index])`, and evaluates on the
//! test partition. Cells run in parallel; the report lists them in grid order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, EvalError, EvaluationReport};
use crate::dataset::{stratified_split, DatasetManifest, SplitConfig, SplitResult};
use crate::embedding::EmbeddingSet;
use crate::heads::{train_head, HeadKind, LabeledEmbeddings, TrainingConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub provider_tag: String,
    pub labels: Vec<String>,
    /// Grid order: split-major, then head.
    pub cells: Vec<EvaluationReport>,
}

impl SweepReport {
    pub fn get(&self, split_label: &str, head: HeadKind) -> Option<&EvaluationReport> {
        self.cells
            .iter()
            .find(|c| c.head == head && c.split.as_ref().map(SplitConfig::label).as_deref() == Some(split_label))
    }

    pub fn split_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            let l = c.split.as_ref().map(SplitConfig::label).unwrap_or_default();
            if !out.contains(&l) {
                out.push(l);
            }
        }
        out
    }

    pub fn heads(&self) -> Vec<HeadKind> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.head) {
                out.push(c.head);
            }
        }
        out
    }

    /// Overall accuracy per (split, head); `None` where no cell exists.
    pub fn accuracy_table(&self) -> Vec<(String, Vec<Option<f64>>)> {
        let heads = self.heads();
        self.split_labels()
            .into_iter()
            .map(|s| {
                let row = heads
                    .iter()
                    .map(|&h| self.get(&s, h).map(|c| c.overall_accuracy))
                    .collect();
                (s, row)
            })
            .collect()
    }

    pub fn min_accuracy(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.overall_accuracy)
            .fold(f64::INFINITY, f64::min)
    }

    /// Plain-text accuracy grid, one row per split.
    pub fn render_grid(&self) -> String {
        let heads = self.heads();
        let mut out = format!("{:<8}", "split");
        for h in &heads {
            out.push_str(&format!("{:>9}", h.as_str()));
        }
        out.push('\n');
        for (split, row) in self.accuracy_table() {
            out.push_str(&format!("{split:<8}"));
            for v in row {
                let cell = v.map(super::display2).unwrap_or_else(|| "-".into());
                out.push_str(&format!("{cell:>9}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEvent {
    pub split_label: String,
    pub head: HeadKind,
    pub overall_accuracy: f64,
    pub completed: usize,
    pub total: usize,
}

pub fn cell_seed(base: u64, split_index: usize, head_index: usize) -> u64 {
    derive_seed(base, &[split_index as u64, head_index as u64])
}

struct Partitions {
    train: LabeledEmbeddings,
    validation: LabeledEmbeddings,
    test: LabeledEmbeddings,
}

fn partition(
    manifest: &DatasetManifest,
    embeddings: &EmbeddingSet,
    split: &SplitConfig,
) -> Result<(SplitResult, Partitions), EvalError> {
    let result = stratified_split(manifest, split)?;
    let parts = Partitions {
        train: LabeledEmbeddings::from_ids(embeddings, manifest, &result.train_ids)?,
        validation: LabeledEmbeddings::from_ids(embeddings, manifest, &result.validation_ids)?,
        test: LabeledEmbeddings::from_ids(embeddings, manifest, &result.test_ids)?,
    };
    Ok((result, parts))
}

fn train_and_evaluate(parts: &Partitions, split: &SplitConfig, head: HeadKind, config: &TrainingConfig) -> Result<EvaluationReport, EvalError> {
    let (model, _trace) = train_head(head, &parts.train, &parts.validation, config)?;
    Ok(evaluate(&model, &parts.test, config.test_batch_size)?.with_context(*split, config.seed))
}

/// Split, train one head with `config` as given, and evaluate on the test
/// partition.
pub fn run_cell(
    manifest: &DatasetManifest,
    embeddings: &EmbeddingSet,
    split: &SplitConfig,
    head: HeadKind,
    config: &TrainingConfig,
) -> Result<EvaluationReport, EvalError> {
    let (_, parts) = partition(manifest, embeddings, split)?;
    train_and_evaluate(&parts, split, head, config)
}

pub fn run_sweep(
    manifest: &DatasetManifest,
    embeddings: &EmbeddingSet,
    splits: &[SplitConfig],
    heads: &[HeadKind],
    config: &TrainingConfig,
) -> Result<SweepReport, EvalError> {
    run_sweep_with_progress(manifest, embeddings, splits, heads, config, &|_| {})
}

/// As [`run_sweep`], calling `progress` as each cell finishes (in completion
/// order, which may differ between runs; the report itself does not).
pub fn run_sweep_with_progress(
    manifest: &DatasetManifest,
    embeddings: &EmbeddingSet,
    splits: &[SplitConfig],
    heads: &[HeadKind],
    config: &TrainingConfig,
    progress: &(dyn Fn(&SweepEvent) + Sync),
) -> Result<SweepReport, EvalError> {
    if splits.is_empty() || heads.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    config.validate()?;
    let embeddings = embeddings.covering(manifest)?;

    let cell_error = |split: &SplitConfig, head: HeadKind, e: EvalError| EvalError::Cell {
        split: split.label(),
        head,
        source: Box::new(e),
    };

    let partitions: Vec<Partitions> = splits
        .iter()
        .map(|s| partition(manifest, &embeddings, s).map(|(_, p)| p).map_err(|e| cell_error(s, heads[0], e)))
        .collect::<Result<_, _>>()?;

    let total = splits.len() * heads.len();
    let completed = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<EvaluationReport, EvalError>> = (0..total)
        .into_par_iter()
        .map(|cell| {
            let (si, hi) = (cell / heads.len(), cell % heads.len());
            let (split, head) = (&splits[si], heads[hi]);
            let cfg = config.clone().with_seed(cell_seed(config.seed, si, hi));
            let report = train_and_evaluate(&partitions[si], split, head, &cfg).map_err(|e| cell_error(split, head, e))?;
            let done = completed.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
            progress(&SweepEvent {
                split_label: split.label(),
                head,
                overall_accuracy: report.overall_accuracy,
                completed: done,
                total,
            });
            Ok(report)
        })
        .collect();

    Ok(SweepReport {
        dataset: manifest.name.clone(),
        provider_tag: embeddings.provider_tag.clone(),
        labels: manifest.label_names(),
        cells: results.into_iter().collect::<Result<_, _>>()?,
    })
}
