use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "confusion_counts")]
    pub counts: Vec<Vec<u64>>,
    /// Each row divided by its sum; rows with no samples stay all-zero.
    #[serde(rename = "confusion_normalized")]
    pub normalized: Vec<Vec<f64>>,
    /// True classes absent from the evaluated samples.
    pub empty_rows: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// The normalized diagonal.
    pub fn per_class_accuracy(&self) -> Vec<f64> {
        (0..self.normalized.len()).map(|i| self.normalized[i][i]).collect()
    }
}

pub fn confusion_matrix(truths: &[usize], predictions: &[usize], num_classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if truths.len() != predictions.len() {
        return Err(EvalError::LengthMismatch {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in truths.iter().zip(predictions) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(EvalError::LabelOutOfRange { label, num_classes });
            }
        }
        counts[t][p] += 1;
    }
    let mut empty_rows = Vec::new();
    let normalized = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let sum: u64 = row.iter().sum();
            if sum == 0 {
                empty_rows.push(i);
                vec![0.0; num_classes]
            } else {
                row.iter().map(|&c| c as f64 / sum as f64).collect()
            }
        })
        .collect();
    Ok(ConfusionMatrix {
        counts,
        normalized,
        empty_rows,
    })
}
