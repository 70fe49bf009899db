//! k-nearest-neighbour head: Euclidean distance, unweighted majority vote.

use super::{HeadError, LabeledEmbeddings, Prediction, TrainingConfig};

/// The training set kept verbatim, plus `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    references: LabeledEmbeddings,
}

impl KnnModel {
    pub fn new(k: usize, references: LabeledEmbeddings) -> Result<Self, HeadError> {
        if k == 0 {
            return Err(HeadError::InvalidConfig("k must be at least 1".into()));
        }
        if k > references.len() {
            return Err(HeadError::KTooLarge {
                k,
                available: references.len(),
            });
        }
        Ok(Self { k, references })
    }

    pub fn references(&self) -> &LabeledEmbeddings {
        &self.references
    }

    pub fn dim(&self) -> usize {
        self.references.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.references.num_classes()
    }

    /// Indices of the `k` nearest references, nearest first; equal distances
    /// resolve to the earlier reference.
    pub fn neighbours(&self, x: &[f32]) -> Result<Vec<usize>, HeadError> {
        if x.len() != self.dim() {
            return Err(HeadError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let refs = &self.references;
        let mut dist: Vec<(f64, usize)> = (0..refs.len())
            .map(|i| {
                let d2 = refs
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| {
                        let t = f64::from(a) - f64::from(b);
                        t * t
                    })
                    .sum::<f64>();
                (d2, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(order);
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }
}

/// Stores the training set; no optimisation happens.
pub fn train_knn(train: &LabeledEmbeddings, config: &TrainingConfig) -> Result<KnnModel, HeadError> {
    if train.is_empty() {
        return Err(HeadError::EmptyTrainingSet);
    }
    KnnModel::new(config.knn_k, train.clone())
}

/// Scores are per-class vote fractions among the `k` nearest references;
/// vote ties go to the lowest class id.
pub fn predict_knn(model: &KnnModel, x: &[f32]) -> Result<Prediction, HeadError> {
    let neighbours = model.neighbours(x)?;
    let mut votes = vec![0usize; model.num_classes()];
    for &i in &neighbours {
        votes[model.references.label(i)] += 1;
    }
    let k = neighbours.len() as f64;
    let scores = votes.iter().map(|&v| v as f64 / k).collect();
    Ok(Prediction::from_scores(scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(points: &[([f32; 2], usize)], classes: usize) -> LabeledEmbeddings {
        let mut d = LabeledEmbeddings::new(2, classes);
        for (i, (p, l)) in points.iter().enumerate() {
            d.push(format!("r{i}"), p, *l).unwrap();
        }
        d
    }

    #[test]
    fn stores_references_verbatim() {
        let data = refs(&[([0.1, 0.2], 0), ([1.0e-7, -3.5], 1), ([2.0, 2.0], 1)], 2);
        let m = train_knn(&data, &TrainingConfig::default()).unwrap();
        assert_eq!(m.references(), &data);
        assert_eq!(m.k, 3);
    }

    #[test]
    fn k_larger_than_training_set_fails() {
        let data = refs(&[([0.0, 0.0], 0), ([1.0, 0.0], 1), ([2.0, 0.0], 1)], 2);
        let cfg = TrainingConfig {
            knn_k: 4,
            ..TrainingConfig::default()
        };
        assert!(matches!(train_knn(&data, &cfg), Err(HeadError::KTooLarge { k: 4, available: 3 })));
    }

    #[test]
    fn exact_match_with_k1() {
        let data = refs(&[([0.0, 0.0], 0), ([5.0, 5.0], 2), ([9.0, 0.0], 1)], 3);
        let m = KnnModel::new(1, data).unwrap();
        let p = predict_knn(&m, &[5.0, 5.0]).unwrap();
        assert_eq!(p.label, 2);
        assert_eq!(p.scores, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn majority_of_three() {
        let data = refs(
            &[([1.0, 0.0], 1), ([0.0, 1.0], 1), ([1.0, 1.0], 4), ([10.0, 10.0], 0)],
            5,
        );
        let m = KnnModel::new(3, data).unwrap();
        let p = predict_knn(&m, &[0.5, 0.5]).unwrap();
        assert_eq!(p.label, 1);
        assert!((p.scores[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.scores[4] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_ties_use_insertion_order() {
        // Both references sit at distance 1; the first one inserted wins.
        let data = refs(&[([1.0, 0.0], 3), ([-1.0, 0.0], 1)], 4);
        let m = KnnModel::new(1, data).unwrap();
        assert_eq!(predict_knn(&m, &[0.0, 0.0]).unwrap().label, 3);
    }

    #[test]
    fn vote_ties_use_lowest_class() {
        let data = refs(&[([1.0, 0.0], 2), ([2.0, 0.0], 0)], 3);
        let m = KnnModel::new(2, data).unwrap();
        assert_eq!(predict_knn(&m, &[0.0, 0.0]).unwrap().label, 0);
    }
}
