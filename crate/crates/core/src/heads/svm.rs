//! One-vs-rest linear SVM head trained by mini-batch subgradient descent.

use super::objective::hinge_objective;
use super::{
    gather_rows, BatchSampler, Checkpoint, HeadError, LabeledEmbeddings, Prediction, Standardizer, TrainingConfig,
    TrainingTrace, TRACE_INTERVAL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    dim: usize,
    /// One `D`-vector per class, row-major.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub class_order: Vec<usize>,
}

impl SvmModel {
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
}

/// `+1` for members of `class`, `-1` otherwise.
fn signs(labels: &[usize], class: usize) -> Vec<f64> {
    labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect()
}

/// Trains `K` binary classifiers, class `c` against the rest, each
/// minimising `lambda/2 |w|^2 + mean hinge`. All classifiers see the same
/// mini-batch at each step.
///
/// The trace records the summed objective over the full training set every
/// [`TRACE_INTERVAL`] steps.
pub fn train_svm(train: &LabeledEmbeddings, config: &TrainingConfig) -> Result<(SvmModel, TrainingTrace), HeadError> {
    config.validate()?;
    train.require_all_classes()?;
    let (k, d) = (train.num_classes(), train.dim());
    let lambda = config.svm_regularization;
    let lr = config.learning_rate;
    let scaler = if config.standardize_features {
        Standardizer::fit(train)
    } else {
        Standardizer::identity(d)
    };
    let x = scaler.transform(train);
    let full_signs: Vec<Vec<f64>> = (0..k).map(|c| signs(train.labels(), c)).collect();

    let mut weights = vec![0.0f64; k * d];
    let mut bias = vec![0.0f64; k];
    let mut sampler = BatchSampler::new(train.len(), config.train_batch_size, config.seed);
    let mut trace = TrainingTrace::default();
    let mut batch_x = Vec::with_capacity(config.train_batch_size * d);
    let mut batch_labels = Vec::with_capacity(config.train_batch_size);

    for step in 1..=config.steps {
        let rows = sampler.next_batch();
        gather_rows(&x, d, rows, &mut batch_x);
        batch_labels.clear();
        batch_labels.extend(rows.iter().map(|&r| train.label(r)));

        for c in 0..k {
            let y = signs(&batch_labels, c);
            let w = &mut weights[c * d..(c + 1) * d];
            let (obj, grad_w, grad_b) = hinge_objective(w, bias[c], &batch_x, &y, lambda);
            if !obj.is_finite() {
                return Err(HeadError::NonFinite { step });
            }
            for (wj, g) in w.iter_mut().zip(&grad_w) {
                *wj -= lr * g;
            }
            bias[c] -= lr * grad_b;
            if w.iter().any(|v| !v.is_finite()) || !bias[c].is_finite() {
                return Err(HeadError::NonFinite { step });
            }
        }

        if step % TRACE_INTERVAL == 0 {
            let train_objective = (0..k)
                .map(|c| hinge_objective(&weights[c * d..(c + 1) * d], bias[c], &x, &full_signs[c], lambda).0)
                .sum();
            trace.checkpoints.push(Checkpoint {
                step,
                train_objective,
                validation_accuracy: None,
            });
        }
    }

    scaler.fold(&mut weights, &mut bias);
    let model = SvmModel {
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

/// Scores are the decision values `w_c . x + b_c`.
pub fn predict_svm(model: &SvmModel, x: &[f32]) -> Result<Prediction, HeadError> {
    if x.len() != model.dim {
        return Err(HeadError::DimensionMismatch {
            expected: model.dim,
            found: x.len(),
        });
    }
    let scores = model
        .weights
        .chunks_exact(model.dim)
        .zip(&model.bias)
        .map(|(w, &b)| {
            f64::from(b)
                + w.iter()
                    .zip(x)
                    .map(|(&a, &v)| f64::from(a) * f64::from(v))
                    .sum::<f64>()
        })
        .collect();
    Ok(Prediction::from_scores(scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_scores_zero() {
        let p = predict_svm(&SvmModel::zeros(4, 3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.scores, vec![0.0; 4]);
        assert_eq!(p.label, 0);
    }

    #[test]
    fn decision_value_is_dot_product() {
        let mut w = vec![0.0f32; 6];
        w[3] = 1.0; // class 1 gets e1
        let m = SvmModel::from_parts(3, w, vec![0.0, 0.0]).unwrap();
        let p = predict_svm(&m, &[5.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.scores[1], 5.0);
        assert_eq!(p.label, 1);
    }

    #[test]
    fn separates_three_clusters() {
        let mut d = LabeledEmbeddings::new(2, 3);
        let centers = [[0.0f32, 4.0], [4.0, -2.0], [-4.0, -2.0]];
        for i in 0..30 {
            let j = (i as f32 / 30.0) - 0.5;
            for (c, m) in centers.iter().enumerate() {
                d.push(format!("{c}_{i}"), &[m[0] + j, m[1] - j], c).unwrap();
            }
        }
        let (m, trace) = train_svm(&d, &TrainingConfig::default()).unwrap();
        for i in 0..d.len() {
            assert_eq!(predict_svm(&m, d.row(i)).unwrap().label, d.label(i));
        }
        assert_eq!(trace.checkpoints.len(), 40);
        assert!(trace.checkpoints.iter().all(|c| c.validation_accuracy.is_none()));
    }

    #[test]
    fn deterministic_under_seed() {
        let mut d = LabeledEmbeddings::new(1, 2);
        for i in 0..10 {
            d.push(format!("{i}"), &[i as f32 - 4.5], usize::from(i >= 5)).unwrap();
        }
        let cfg = TrainingConfig {
            steps: 120,
            train_batch_size: 3,
            seed: 5,
            ..TrainingConfig::default()
        };
        assert_eq!(train_svm(&d, &cfg).unwrap().0, train_svm(&d, &cfg).unwrap().0);
    }
}
