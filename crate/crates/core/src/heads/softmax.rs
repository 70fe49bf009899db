//! Multinomial softmax regression head.

use super::objective::{softmax, softmax_cross_entropy};
use super::{
    gather_rows, sampled_accuracy, BatchSampler, Checkpoint, HeadError, LabeledEmbeddings, Prediction, Standardizer,
    TrainingConfig, TrainingTrace, TRACE_INTERVAL,
};
use crate::rng::{derive_seed, SeededRng};

/// Stream index for validation sampling, kept apart from batch sampling.
const VALIDATION_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    dim: usize,
    /// `K x D`, row-major by class.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub class_order: Vec<usize>,
}

impl SoftmaxModel {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        Self {
            dim,
            weights: vec![0.0; num_classes * dim],
            bias: vec![0.0; num_classes],
            class_order: (0..num_classes).collect(),
        }
    }

    pub fn from_parts(dim: usize, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self, HeadError> {
        if weights.len() != bias.len() * dim {
            return Err(HeadError::DimensionMismatch {
                expected: bias.len() * dim,
                found: weights.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(HeadError::NonFinite { step: 0 });
        }
        let k = bias.len();
        Ok(Self {
            dim,
            weights,
            bias,
            class_order: (0..k).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, x: &[f32]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, &b)| {
                f64::from(b)
                    + row
                        .iter()
                        .zip(x)
                        .map(|(&w, &v)| f64::from(w) * f64::from(v))
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Mini-batch gradient descent on mean cross-entropy from zero weights.
///
/// Every [`TRACE_INTERVAL`] steps the full-training-set loss and the accuracy
/// on a `validation_batch_size` sample of `validation` are recorded.
pub fn train_softmax(
    train: &LabeledEmbeddings,
    validation: &LabeledEmbeddings,
    config: &TrainingConfig,
) -> Result<(SoftmaxModel, TrainingTrace), HeadError> {
    config.validate()?;
    train.require_all_classes()?;
    if !validation.is_empty() && validation.dim() != train.dim() {
        return Err(HeadError::DimensionMismatch {
            expected: train.dim(),
            found: validation.dim(),
        });
    }
    let (k, d) = (train.num_classes(), train.dim());
    let scaler = if config.standardize_features {
        Standardizer::fit(train)
    } else {
        Standardizer::identity(d)
    };
    let x = scaler.transform(train);

    let mut weights = vec![0.0f64; k * d];
    let mut bias = vec![0.0f64; k];
    let mut sampler = BatchSampler::new(train.len(), config.train_batch_size, config.seed);
    let mut val_rng = SeededRng::new(derive_seed(config.seed, &[VALIDATION_STREAM]));
    let mut trace = TrainingTrace::default();
    let mut batch_x = Vec::with_capacity(config.train_batch_size * d);
    let mut batch_y = Vec::with_capacity(config.train_batch_size);

    for step in 1..=config.steps {
        let rows = sampler.next_batch();
        gather_rows(&x, d, rows, &mut batch_x);
        batch_y.clear();
        batch_y.extend(rows.iter().map(|&r| train.label(r)));

        let (loss, grad_w, grad_b) = softmax_cross_entropy(&weights, &bias, &batch_x, &batch_y);
        if !loss.is_finite() {
            return Err(HeadError::NonFinite { step });
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= config.learning_rate * g;
        }
        for (b, g) in bias.iter_mut().zip(&grad_b) {
            *b -= config.learning_rate * g;
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(HeadError::NonFinite { step });
        }

        if step % TRACE_INTERVAL == 0 {
            let (train_objective, _, _) = softmax_cross_entropy(&weights, &bias, &x, train.labels());
            let validation_accuracy =
                sampled_accuracy(validation, config.validation_batch_size, &mut val_rng, |row| {
                    let z: Vec<f64> = row
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| (f64::from(v) - scaler.mean[j]) * scaler.inv_std[j])
                        .collect();
                    let logits: Vec<f64> = weights
                        .chunks_exact(d)
                        .zip(&bias)
                        .map(|(r, b)| b + r.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>())
                        .collect();
                    super::argmax_lowest(&logits)
                });
            trace.checkpoints.push(Checkpoint {
                step,
                train_objective,
                validation_accuracy,
            });
        }
    }

    scaler.fold(&mut weights, &mut bias);
    let model = SoftmaxModel {
        dim: d,
        weights: weights.iter().map(|&w| w as f32).collect(),
        bias: bias.iter().map(|&b| b as f32).collect(),
        class_order: (0..k).collect(),
    };
    if model.weights.iter().chain(&model.bias).any(|v| !v.is_finite()) {
        return Err(HeadError::NonFinite { step: config.steps });
    }
    Ok((model, trace))
}

/// Scores are `softmax(Wx + b)`; the label is their argmax, lowest id on ties.
pub fn predict_softmax(model: &SoftmaxModel, x: &[f32]) -> Result<Prediction, HeadError> {
    if x.len() != model.dim {
        return Err(HeadError::DimensionMismatch {
            expected: model.dim,
            found: x.len(),
        });
    }
    Ok(Prediction::from_scores(softmax(&model.logits(x))))
}
