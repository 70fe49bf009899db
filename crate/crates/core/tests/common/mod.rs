//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's training or prediction code; the
//! only shared pieces are plain data types and the seeded generator.
#![allow(dead_code)]

use bottleneck::heads::objective::{hinge_objective, softmax_cross_entropy};
use bottleneck::heads::LabeledEmbeddings;
use bottleneck::rng::SeededRng;

pub const FD_STEP: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

/// One random softmax problem: returns the worst relative error between the
/// analytic gradient and central differences over every weight and bias.
pub fn softmax_gradient_probe(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let k = 2 + rng.index(5);
    let d = 1 + rng.index(8);
    let n = 1 + rng.index(8);
    let w: Vec<f64> = (0..k * d).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
    let b: Vec<f64> = (0..k).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
    let x: Vec<f64> = (0..n * d).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();
    let y: Vec<usize> = (0..n).map(|_| rng.index(k)).collect();

    let (_, gw, gb) = softmax_cross_entropy(&w, &b, &x, &y);
    let loss = |w: &[f64], b: &[f64]| -> f64 {
        // Direct log-sum-exp, written out independently of the library.
        let mut total = 0.0;
        for (row, &label) in x.chunks(d).zip(&y) {
            let z: Vec<f64> = (0..k)
                .map(|c| b[c] + (0..d).map(|j| w[c * d + j] * row[j]).sum::<f64>())
                .collect();
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse - z[label];
        }
        total / n as f64
    };
    let mut worst: f64 = 0.0;
    for i in 0..k * d {
        let (mut up, mut dn) = (w.clone(), w.clone());
        up[i] += FD_STEP;
        dn[i] -= FD_STEP;
        let num = (loss(&up, &b) - loss(&dn, &b)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(gw[i], num));
    }
    for i in 0..k {
        let (mut up, mut dn) = (b.clone(), b.clone());
        up[i] += FD_STEP;
        dn[i] -= FD_STEP;
        let num = (loss(&w, &up) - loss(&w, &dn)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(gb[i], num));
    }
    worst
}

/// One random hinge problem, redrawn until every margin sits at least 1e-3
/// away from the kink so the finite-difference step cannot cross it.
pub fn hinge_gradient_probe(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let (d, n, w, b, x, y, lambda) = loop {
        let d = 1 + rng.index(8);
        let n = 1 + rng.index(8);
        let w: Vec<f64> = (0..d).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let b = uniform(&mut rng, -1.0, 1.0);
        let x: Vec<f64> = (0..n * d).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| if rng.index(2) == 0 { -1.0 } else { 1.0 }).collect();
        let lambda = uniform(&mut rng, 1e-4, 1.0);
        let clear = x.chunks(d).zip(&y).all(|(row, yi)| {
            let f = b + w.iter().zip(row).map(|(a, c)| a * c).sum::<f64>();
            (yi * f - 1.0).abs() > 1e-3
        });
        if clear {
            break (d, n, w, b, x, y, lambda);
        }
    };
    let (_, gw, gb) = hinge_objective(&w, b, &x, &y, lambda);
    let objective = |w: &[f64], b: f64| -> f64 {
        let mut hinge = 0.0;
        for (row, yi) in x.chunks(d).zip(&y) {
            let f = b + (0..d).map(|j| w[j] * row[j]).sum::<f64>();
            hinge += (1.0 - yi * f).max(0.0);
        }
        0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge / n as f64
    };
    let mut worst: f64 = 0.0;
    for i in 0..d {
        let (mut up, mut dn) = (w.clone(), w.clone());
        up[i] += FD_STEP;
        dn[i] -= FD_STEP;
        let num = (objective(&up, b) - objective(&dn, b)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(gw[i], num));
    }
    let num = (objective(&w, b + FD_STEP) - objective(&w, b - FD_STEP)) / (2.0 * FD_STEP);
    worst.max(rel_err(gb, num))
}

/// Exhaustive kNN: full stable sort by distance, majority vote, lowest
/// class wins ties.
pub fn brute_force_knn(refs: &LabeledEmbeddings, query: &[f32], k: usize) -> usize {
    let mut all: Vec<(f64, usize)> = (0..refs.len())
        .map(|i| {
            let d: f64 = refs
                .row(i)
                .iter()
                .zip(query)
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum();
            (d, i)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut votes = vec![0usize; refs.num_classes()];
    for &(_, i) in &all[..k] {
        votes[refs.label(i)] += 1;
    }
    let best = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == best).unwrap()
}

/// Two Gaussian blobs in 2-D at `(-offset, 0)` and `(offset, 0)`.
pub fn two_blobs(per_class: usize, offset: f64, sigma: f64, seed: u64) -> LabeledEmbeddings {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = SeededRng::new(seed);
    let mut data = LabeledEmbeddings::new(2, 2);
    for i in 0..2 * per_class {
        let c = i % 2;
        let cx = if c == 0 { -offset } else { offset };
        let zx: f64 = StandardNormal.sample(&mut rng);
        let zy: f64 = StandardNormal.sample(&mut rng);
        data.push(format!("p{i}"), &[(cx + sigma * zx) as f32, (sigma * zy) as f32], c).unwrap();
    }
    data
}

/// Rosenblatt perceptron with bias. `Some((w, b))` if it reaches zero
/// training errors within `epochs`, which proves linear separability.
pub fn perceptron(data: &LabeledEmbeddings, epochs: usize) -> Option<(Vec<f64>, f64)> {
    let d = data.dim();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..epochs {
        let mut mistakes = 0;
        for i in 0..data.len() {
            let y = if data.label(i) == 1 { 1.0 } else { -1.0 };
            let x = data.row(i);
            let f = b + (0..d).map(|j| w[j] * x[j] as f64).sum::<f64>();
            if y * f <= 0.0 {
                mistakes += 1;
                for j in 0..d {
                    w[j] += y * x[j] as f64;
                }
                b += y;
            }
        }
        if mistakes == 0 {
            return Some((w, b));
        }
    }
    None
}

/// Hard-ish margin linear SVM by dual coordinate descent on features
/// augmented with a constant 1 (so the bias is lightly regularised).
/// Returns `(w, b)` for the binary problem `label == positive`.
pub fn exact_svm(data: &LabeledEmbeddings, positive: usize, c: f64, sweeps: usize) -> (Vec<f64>, f64) {
    let d = data.dim();
    let n = data.len();
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|i| data.row(i).iter().map(|&v| v as f64).chain([1.0]).collect())
        .collect();
    let ys: Vec<f64> = (0..n).map(|i| if data.label(i) == positive { 1.0 } else { -1.0 }).collect();
    let q: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d + 1];
    for _ in 0..sweeps {
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            let g = ys[i] * xs[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - 1.0;
            let new = (alpha[i] - g / q[i]).clamp(0.0, c);
            let delta = new - alpha[i];
            if delta != 0.0 {
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += delta * ys[i] * xj;
                }
                alpha[i] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < 1e-10 {
            break;
        }
    }
    let b = w.pop().unwrap();
    (w, b)
}
