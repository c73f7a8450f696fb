//! Softmax classification head trained on the propagated embedding and the
//! randomized labels, plus bootstrap evaluation.
//!
//! [`train_head`] takes only the embedding, the randomized labels and the
//! node split. No raw graph, feature matrix or clean label is reachable from
//! its arguments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Splits;
use crate::matrix::Matrix;
use crate::nn::{dropout_mask, Adam, Mlp, MlpGrads};
use crate::perturb::NoisyLabels;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before the learning rate decays.
    pub plateau_patience: usize,
    pub decay: f64,
    /// Epochs without validation improvement before training stops.
    pub early_stop_patience: usize,
    /// Training stops once the learning rate decays below this.
    pub min_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            dropout: 0.2,
            lr: 1e-3,
            max_epochs: 1500,
            plateau_patience: 20,
            decay: 0.5,
            early_stop_patience: 100,
            min_lr: 1e-5,
        }
    }
}

/// Perceptron head with per-column standardization of its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    pub mlp: Mlp,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl HeadModel {
    fn standardize(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for u in 0..out.rows() {
            for ((v, m), s) in out.row_mut(u).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    /// Class probabilities for the given rows of `hk`.
    pub fn predict_proba(&self, hk: &Matrix, nodes: &[usize]) -> Matrix {
        let x = self.standardize(&hk.select_rows(nodes));
        softmax_rows(&self.mlp.predict(&x))
    }

    pub fn predict(&self, hk: &Matrix, nodes: &[usize]) -> Vec<usize> {
        let p = self.predict_proba(hk, nodes);
        p.iter_rows().map(argmax).collect()
    }
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for u in 0..out.rows() {
        let row = out.row_mut(u);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// Mean cross-entropy and its gradient with respect to the logits.
fn cross_entropy(logits: &Matrix, targets: &[usize]) -> (f64, Matrix) {
    let mut grad = softmax_rows(logits);
    let n = targets.len() as f64;
    let mut loss = 0.0;
    for (u, &y) in targets.iter().enumerate() {
        loss -= grad[(u, y)].max(1e-300).ln();
        grad[(u, y)] -= 1.0;
    }
    grad.scale(1.0 / n);
    (loss / n, grad)
}

/// Loss and parameter gradients on already-standardized inputs, without
/// dropout.
pub fn head_loss_and_grad(mlp: &Mlp, x: &Matrix, targets: &[usize]) -> (f64, MlpGrads) {
    let cache = mlp.forward(x, None);
    let (loss, d_out) = cross_entropy(&cache.out, targets);
    let (grads, _) = mlp.backward(x, &cache, &d_out, None, false);
    (loss, grads)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HeadTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

fn labeled(nodes: &[usize], labels: &NoisyLabels) -> (Vec<usize>, Vec<usize>) {
    nodes
        .iter()
        .filter_map(|&u| labels.get(u).map(|y| (u, y)))
        .unzip()
}

pub fn train_head(
    hk: &Matrix,
    labels: &NoisyLabels,
    splits: &Splits,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(HeadModel, HeadTrace)> {
    if labels.labels().len() != hk.rows() {
        return Err(Error::DimensionMismatch {
            expected: hk.rows(),
            got: labels.labels().len(),
        });
    }
    let (train_nodes, train_y) = labeled(&splits.train, labels);
    if train_nodes.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let (val_nodes, val_y) = labeled(&splits.val, labels);

    let d = hk.cols();
    let n = hk.rows() as f64;
    let mean: Vec<f64> = hk.column_sums().into_iter().map(|s| s / n).collect();
    let mut scale = vec![0.0; d];
    for row in hk.iter_rows() {
        for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scale {
        *s = (*s / n).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }

    let mut rng = stream_rng(seed, "head-init");
    let mut model = HeadModel {
        mlp: Mlp::new(d, cfg.hidden, labels.num_classes, &mut rng),
        mean,
        scale,
    };
    let x_train = model.standardize(&hk.select_rows(&train_nodes));
    let x_val = model.standardize(&hk.select_rows(&val_nodes));

    let mut drop_rng = stream_rng(seed, "head-dropout");
    let mut opt = Adam::new(cfg.lr);
    let mut trace = HeadTrace::default();
    let mut best = (f64::INFINITY, model.mlp.clone());
    let mut plateau_best = f64::INFINITY;
    let mut since_plateau = 0;
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let mask = (cfg.dropout > 0.0)
            .then(|| dropout_mask(x_train.rows(), cfg.hidden, cfg.dropout, &mut drop_rng));
        let cache = model.mlp.forward(&x_train, mask.as_ref());
        let (loss, d_out) = cross_entropy(&cache.out, &train_y);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let (grads, _) = model
            .mlp
            .backward(&x_train, &cache, &d_out, mask.as_ref(), false);
        let g = grads.slices();
        opt.step(&mut model.mlp.params_mut(), &g);

        let monitor = if val_nodes.is_empty() {
            loss
        } else {
            cross_entropy(&model.mlp.predict(&x_val), &val_y).0
        };
        trace.train_loss.push(loss);
        trace.val_loss.push(monitor);

        if monitor < best.0 {
            best = (monitor, model.mlp.clone());
            trace.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        // relative threshold as in the usual plateau schedulers
        if monitor < plateau_best * (1.0 - 1e-4) {
            plateau_best = monitor;
            since_plateau = 0;
        } else {
            since_plateau += 1;
            if since_plateau > cfg.plateau_patience {
                opt.lr *= cfg.decay;
                since_plateau = 0;
            }
        }
        if since_best >= cfg.early_stop_patience || opt.lr < cfg.min_lr {
            break;
        }
    }
    model.mlp = best.1;
    Ok((model, trace))
}

/// Test accuracy with a percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub ci95: (f64, f64),
    pub n_test: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Accuracy on `test` against clean labels; unlabeled test nodes are skipped.
pub fn evaluate(
    model: &HeadModel,
    hk: &Matrix,
    clean_labels: &[Option<usize>],
    test: &[usize],
    seed: u64,
) -> Result<Metrics> {
    let nodes: Vec<usize> = test
        .iter()
        .copied()
        .filter(|&u| clean_labels[u].is_some())
        .collect();
    if nodes.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let pred = model.predict(hk, &nodes);
    let hits: Vec<f64> = nodes
        .iter()
        .zip(&pred)
        .map(|(&u, &p)| f64::from(u8::from(clean_labels[u] == Some(p))))
        .collect();
    Ok(Metrics {
        accuracy: hits.iter().sum::<f64>() / hits.len() as f64,
        ci95: bootstrap_mean_ci(&hits, BOOTSTRAP_RESAMPLES, seed),
        n_test: hits.len(),
    })
}

/// 2.5% / 97.5% percentiles of the resampled mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = stream_rng(seed, "bootstrap");
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    (percentile(&means, 0.025), percentile(&means, 0.975))
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::randomized_response;

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = Matrix::from_rows(&[vec![1000.0, -5.0, 3.0], vec![0.0, 0.0, 0.0]]);
        let p = softmax_rows(&m);
        for row in p.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_degenerate_and_ordered() {
        assert_eq!(bootstrap_mean_ci(&[1.0; 40], 2000, 1), (1.0, 1.0));
        let v: Vec<f64> = (0..100).map(|i| f64::from(u8::from(i % 4 == 0))).collect();
        let (lo, hi) = bootstrap_mean_ci(&v, 2000, 1);
        assert!(lo < 0.25 && 0.25 < hi);
    }

    #[test]
    fn perfect_predictor_on_separable_data() {
        // two Gaussian-free blobs: class = sign of the first coordinate
        let n = 200;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|u| {
                let c = (u % 2) as f64 * 2.0 - 1.0;
                vec![c * (1.0 + (u as f64 * 0.37).sin().abs()), (u as f64).cos()]
            })
            .collect();
        let hk = Matrix::from_rows(&rows);
        let clean: Vec<Option<usize>> = (0..n).map(|u| Some(u % 2)).collect();
        let labels = randomized_response(&clean, f64::INFINITY, 2, 0).unwrap();
        let splits = Splits {
            train: (0..100).collect(),
            val: (100..150).collect(),
            test: (150..200).collect(),
        };
        let cfg = TrainConfig {
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let (model, _) = train_head(&hk, &labels, &splits, &cfg, 3).unwrap();
        let m = evaluate(&model, &hk, &clean, &splits.test, 0).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.ci95, (1.0, 1.0));
        // evaluation is deterministic: dropout is off
        let again = evaluate(&model, &hk, &clean, &splits.test, 0).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn evaluate_rejects_empty_test_set() {
        let mut rng = stream_rng(0, "t");
        let model = HeadModel {
            mlp: Mlp::new(1, 2, 2, &mut rng),
            mean: vec![0.0],
            scale: vec![1.0],
        };
        let hk = Matrix::zeros(3, 1);
        assert!(matches!(
            evaluate(&model, &hk, &[None, None, None], &[0, 1, 2], 0),
            Err(Error::Empty(_))
        ));
    }
}
