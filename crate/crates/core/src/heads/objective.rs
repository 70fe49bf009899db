//! Losses and (sub)gradients for the linear heads, in f64.
//!
//! Inputs are row-major batches: `x` holds `n` rows of `d` features.

/// Mean cross-entropy of `softmax(W x + b)` against `labels`.
///
/// `weights` is `k x d` row-major. Returns `(loss, dW, db)`.
pub fn softmax_cross_entropy(
    weights: &[f64],
    bias: &[f64],
    x: &[f64],
    labels: &[usize],
) -> (f64, Vec<f64>, Vec<f64>) {
    let k = bias.len();
    let d = weights.len() / k;
    let n = labels.len();
    debug_assert_eq!(x.len(), n * d);

    let mut grad_w = vec![0.0; k * d];
    let mut grad_b = vec![0.0; k];
    let mut loss = 0.0;
    let mut probs = vec![0.0; k];
    for (row, &y) in x.chunks_exact(d).zip(labels) {
        let log_z = log_softmax_into(weights, bias, row, &mut probs);
        loss += log_z.1 - log_z.0[y];
        for c in 0..k {
            let delta = probs[c] - if c == y { 1.0 } else { 0.0 };
            grad_b[c] += delta;
            for (g, xj) in grad_w[c * d..(c + 1) * d].iter_mut().zip(row) {
                *g += delta * xj;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    grad_w.iter_mut().for_each(|g| *g *= inv_n);
    grad_b.iter_mut().for_each(|g| *g *= inv_n);
    (loss * inv_n, grad_w, grad_b)
}

/// Writes softmax probabilities into `probs`; returns the logits and
/// log-partition.
fn log_softmax_into(weights: &[f64], bias: &[f64], row: &[f64], probs: &mut [f64]) -> (Vec<f64>, f64) {
    let d = row.len();
    let logits: Vec<f64> = bias
        .iter()
        .enumerate()
        .map(|(c, b)| b + weights[c * d..(c + 1) * d].iter().zip(row).map(|(w, x)| w * x).sum::<f64>())
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, z) in probs.iter_mut().zip(&logits) {
        *p = (z - max).exp();
        sum += *p;
    }
    probs.iter_mut().for_each(|p| *p /= sum);
    (logits, max + sum.ln())
}

/// Numerically stable softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Binary SVM objective `lambda/2 |w|^2 + mean max(0, 1 - y (w.x + b))` with
/// `y` in {-1, +1}.
///
/// Returns `(objective, dw, db)`. Points with margin exactly 1 are treated as
/// inactive, so their subgradient contribution is zero.
pub fn hinge_objective(w: &[f64], b: f64, x: &[f64], y: &[f64], lambda: f64) -> (f64, Vec<f64>, f64) {
    let d = w.len();
    let n = y.len();
    debug_assert_eq!(x.len(), n * d);

    let mut grad_w = vec![0.0; d];
    let mut grad_b = 0.0;
    let mut hinge = 0.0;
    for (row, &yi) in x.chunks_exact(d).zip(y) {
        let f = b + w.iter().zip(row).map(|(a, c)| a * c).sum::<f64>();
        let margin = yi * f;
        if margin < 1.0 {
            hinge += 1.0 - margin;
            for (g, xj) in grad_w.iter_mut().zip(row) {
                *g -= yi * xj;
            }
            grad_b -= yi;
        }
    }
    let inv_n = 1.0 / n as f64;
    let norm_sq: f64 = w.iter().map(|a| a * a).sum();
    for (g, wj) in grad_w.iter_mut().zip(w) {
        *g = *g * inv_n + lambda * wj;
    }
    (0.5 * lambda * norm_sq + hinge * inv_n, grad_w, grad_b * inv_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_loss_is_log_k() {
        let (loss, _, gb) = softmax_cross_entropy(&[0.0; 12], &[0.0; 6], &[1.0, -2.0], &[3]);
        assert!((loss - 6f64.ln()).abs() < 1e-12);
        assert!((gb[3] + 5.0 / 6.0).abs() < 1e-12);
        assert!((gb[0] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn wide_margin_point_contributes_nothing() {
        // margin = 1 * (2*3 + 0) = 6 > 1
        let (obj, gw, gb) = hinge_objective(&[2.0, 0.0], 0.0, &[3.0, 1.0], &[1.0], 0.0);
        assert_eq!(obj, 0.0);
        assert_eq!(gw, vec![0.0, 0.0]);
        assert_eq!(gb, 0.0);
    }

    #[test]
    fn violating_point_pulls_weights_towards_label() {
        let (obj, gw, gb) = hinge_objective(&[0.0, 0.0], 0.0, &[3.0, 1.0], &[-1.0], 0.0);
        assert_eq!(obj, 1.0);
        assert_eq!(gw, vec![3.0, 1.0]);
        assert_eq!(gb, 1.0);
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = softmax(&[1.0, 2.0, 3.0]);
        let b = softmax(&[101.0, 102.0, 103.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
