//! Topology-based node importance estimation.
//!
//! A perceptron maps each node's features to an `r`-vector, the vectors are
//! propagated `T` times over the graph with weights `1/√(D_u·D_v)` (no
//! self term), and the propagated vector is turned into a score by
//!
//! ```text
//! s(u) = σ( (λ·ln(D_u + α) + φ) · Σ_j f_u^T[j] )
//! ```
//!
//! `λ`, `φ` and the perceptron are fit by Adam on the mean squared error
//! against known importance values on a subset of nodes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, Graph};
use crate::matrix::Matrix;
use crate::nn::{Adam, Mlp, MlpGrads};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnieConfig {
    pub hidden: usize,
    /// Width `r` of the score embedding.
    pub embed: usize,
    pub alpha: f64,
    /// Propagation depth `T`.
    pub depth: usize,
    pub epochs: usize,
    pub lr: f64,
    pub init_lambda: f64,
    pub init_phi: f64,
}

impl Default for TnieConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            embed: 16,
            alpha: 1.0,
            depth: 2,
            epochs: 300,
            lr: 1e-3,
            init_lambda: 1.0,
            init_phi: -2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnieModel {
    pub score_net: Mlp,
    pub lambda: f64,
    pub phi: f64,
    pub alpha: f64,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct TnieGrads {
    pub net: MlpGrads,
    pub lambda: f64,
    pub phi: f64,
}

/// Importance scores and ranks for every node. Rank `n` is the most
/// important node, rank 1 the least.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceState {
    pub scores: Vec<f64>,
    pub ranks: Vec<usize>,
}

impl TnieModel {
    pub fn new(input_dim: usize, cfg: &TnieConfig, seed: u64) -> Result<Self> {
        if cfg.alpha <= 0.0 {
            return Err(Error::invalid("alpha must be positive"));
        }
        if cfg.embed == 0 || cfg.hidden == 0 {
            return Err(Error::invalid("hidden and embed widths must be positive"));
        }
        let mut rng = stream_rng(seed, "tnie-init");
        Ok(Self {
            score_net: Mlp::new(input_dim, cfg.hidden, cfg.embed, &mut rng),
            lambda: cfg.init_lambda,
            phi: cfg.init_phi,
            alpha: cfg.alpha,
            depth: cfg.depth,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.score_net.output_dim()
    }

    fn shifting_degree(&self, degree: usize) -> f64 {
        self.lambda * (degree as f64 + self.alpha).ln() + self.phi
    }

    /// Scores for all nodes of `g`.
    pub fn predict(&self, g: &Graph) -> Result<Vec<f64>> {
        let f0 = score_all(&g.features, self)?;
        let ft = propagate_scores(&f0, &g.adjacency, self.depth);
        Ok((0..g.n())
            .map(|u| estimate_score(ft.row(u), g.adjacency.degree(u), self))
            .collect())
    }
}

/// Score-computing network applied to a single feature row.
pub fn score_computing(x: &[f64], model: &TnieModel) -> Result<Vec<f64>> {
    let m = Matrix::from_vec(1, x.len(), x.to_vec());
    Ok(score_all(&m, model)?.row(0).to_vec())
}

fn score_all(features: &Matrix, model: &TnieModel) -> Result<Matrix> {
    if features.cols() != model.score_net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.score_net.input_dim(),
            got: features.cols(),
        });
    }
    Ok(model.score_net.predict(features))
}

/// `T` rounds of `f_u ← Σ_{v∈N(u)} f_v / √(D_u·D_v)`. Isolated nodes get
/// the zero vector.
pub fn propagate_scores(f0: &Matrix, adj: &Adjacency, depth: usize) -> Matrix {
    let inv_sqrt: Vec<f64> = adj
        .degrees()
        .into_iter()
        .map(|d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut cur = f0.clone();
    for _ in 0..depth {
        let mut next = Matrix::zeros(cur.rows(), cur.cols());
        for u in 0..adj.n() {
            let out = next.row_mut(u);
            for &v in adj.neighbors(u) {
                let w = inv_sqrt[u] * inv_sqrt[v];
                for (o, x) in out.iter_mut().zip(cur.row(v)) {
                    *o += w * x;
                }
            }
        }
        cur = next;
    }
    cur
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic of the shifting degree times the summed propagated vector.
pub fn estimate_score(ft: &[f64], degree: usize, model: &TnieModel) -> f64 {
    sigmoid(model.shifting_degree(degree) * ft.iter().sum::<f64>())
}

/// Mean squared error over `known` (node, target) pairs.
pub fn loss(model: &TnieModel, g: &Graph, known: &[(usize, f64)]) -> Result<f64> {
    Ok(loss_and_grad(model, g, known)?.0)
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_grad(
    model: &TnieModel,
    g: &Graph,
    known: &[(usize, f64)],
) -> Result<(f64, TnieGrads)> {
    if known.is_empty() {
        return Err(Error::Empty("importance training set"));
    }
    if g.features.cols() != model.score_net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.score_net.input_dim(),
            got: g.features.cols(),
        });
    }
    let cache = model.score_net.forward(&g.features, None);
    let ft = propagate_scores(&cache.out, &g.adjacency, model.depth);
    let scale = 1.0 / known.len() as f64;

    let mut loss = 0.0;
    let mut d_lambda = 0.0;
    let mut d_phi = 0.0;
    let mut d_ft = Matrix::zeros(ft.rows(), ft.cols());
    for &(u, target) in known {
        let deg = g.adjacency.degree(u);
        let c = model.shifting_degree(deg);
        let sum: f64 = ft.row(u).iter().sum();
        let s = sigmoid(c * sum);
        let err = s - target;
        loss += scale * err * err;
        let dz = 2.0 * scale * err * s * (1.0 - s);
        d_lambda += dz * sum * (deg as f64 + model.alpha).ln();
        d_phi += dz * sum;
        let d_sum = dz * c;
        d_ft.row_mut(u).iter_mut().for_each(|v| *v += d_sum);
    }
    // The propagation operator is symmetric, so its adjoint is itself.
    let d_f0 = propagate_scores(&d_ft, &g.adjacency, model.depth);
    let (net, _) = model
        .score_net
        .backward(&g.features, &cache, &d_f0, None, false);
    Ok((
        loss,
        TnieGrads {
            net,
            lambda: d_lambda,
            phi: d_phi,
        },
    ))
}

/// Per-epoch training losses.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TnieTrace {
    pub losses: Vec<f64>,
}

/// Fit a model on `known` importance values (targets in `[0, 1]`).
pub fn train_tnie(
    g: &Graph,
    known: &[(usize, f64)],
    cfg: &TnieConfig,
    seed: u64,
) -> Result<(TnieModel, TnieTrace)> {
    if known.is_empty() {
        return Err(Error::Empty("importance training set"));
    }
    if let Some(&(u, t)) = known.iter().find(|(_, t)| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid(format!(
            "importance target {t} for node {u} outside [0, 1]"
        )));
    }
    let mut model = TnieModel::new(g.feature_dim(), cfg, seed)?;
    let mut opt = Adam::new(cfg.lr);
    let mut trace = TnieTrace::default();
    for epoch in 0..cfg.epochs {
        let (l, grads) = loss_and_grad(&model, g, known)?;
        if !l.is_finite() {
            return Err(Error::Diverged { epoch, loss: l });
        }
        trace.losses.push(l);
        let [gw1, gb1, gw2, gb2] = grads.net.slices();
        let gl = [grads.lambda];
        let gp = [grads.phi];
        let [w1, b1, w2, b2] = model.score_net.params_mut();
        let mut lam = [model.lambda];
        let mut phi = [model.phi];
        opt.step(
            &mut [w1, b1, w2, b2, &mut lam, &mut phi],
            &[gw1, gb1, gw2, gb2, &gl, &gp],
        );
        model.lambda = lam[0];
        model.phi = phi[0];
    }
    if !(model.score_net.is_finite() && model.lambda.is_finite() && model.phi.is_finite()) {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            loss: f64::NAN,
        });
    }
    Ok((model, trace))
}

/// Rank nodes by score: rank `n` for the highest score, ties broken by
/// ascending node id (the lower id gets the lower rank).
pub fn rank_importance(scores: &[f64]) -> Result<ImportanceState> {
    if let Some(u) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite importance score at node {u}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (pos, &u) in order.iter().enumerate() {
        ranks[u] = pos + 1;
    }
    Ok(ImportanceState {
        scores: scores.to_vec(),
        ranks,
    })
}

/// Undirected PageRank by power iteration. Isolated nodes spread their mass
/// uniformly.
pub fn pagerank(adj: &Adjacency, damping: f64) -> Vec<f64> {
    let n = adj.n();
    if n == 0 {
        return Vec::new();
    }
    let base = (1.0 - damping) / n as f64;
    let mut pr = vec![1.0 / n as f64; n];
    for _ in 0..200 {
        let dangling: f64 = (0..n).filter(|&u| adj.degree(u) == 0).map(|u| pr[u]).sum();
        let mut next = vec![base + damping * dangling / n as f64; n];
        for u in 0..n {
            let d = adj.degree(u);
            if d == 0 {
                continue;
            }
            let share = damping * pr[u] / d as f64;
            for &v in adj.neighbors(u) {
                next[v] += share;
            }
        }
        let delta: f64 = next.iter().zip(&pr).map(|(a, b)| (a - b).abs()).sum();
        pr = next;
        if delta < 1e-12 {
            break;
        }
    }
    pr
}

/// Affine map onto `[0, 1]`; a constant vector maps to all zeros.
pub fn min_max_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn avg_ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (avg_ranks(a), avg_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        num / (va * vb).sqrt()
    }
}

/// Write `node_id,score,rank`.
pub fn write_importance(path: impl AsRef<Path>, state: &ImportanceState) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node_id", "score", "rank"])?;
    for (u, (s, r)) in state.scores.iter().zip(&state.ranks).enumerate() {
        w.write_record([u.to_string(), s.to_string(), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;

    fn model_with(input: usize, hidden: usize, embed: usize) -> TnieModel {
        TnieModel {
            score_net: Mlp::zeros(input, hidden, embed),
            lambda: 0.0,
            phi: 0.0,
            alpha: 1.0,
            depth: 2,
        }
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let m = model_with(3, 4, 5);
        let out = score_computing(&[0.2, 0.3, 0.5], &m).unwrap();
        assert_eq!(out, vec![0.0; 5]);
        assert!(matches!(
            score_computing(&[1.0], &m),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn identity_hidden_layer_returns_weight_row() {
        let mut m = model_with(3, 3, 2);
        for i in 0..3 {
            m.score_net.w1[(i, i)] = 1.0;
        }
        m.score_net.w2 = Matrix::from_rows(&[vec![0.7, -0.2], vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(score_computing(&[1.0, 0.0, 0.0], &m).unwrap(), vec![0.7, -0.2]);
    }

    #[test]
    fn propagation_on_single_edge_swaps() {
        let adj = Adjacency::from_edges(2, [(0, 1)]).unwrap();
        let f0 = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 4.0]]);
        assert_eq!(propagate_scores(&f0, &adj, 0), f0);
        let f1 = propagate_scores(&f0, &adj, 1);
        assert_eq!(f1.row(0), f0.row(1));
        assert_eq!(f1.row(1), f0.row(0));
        assert_eq!(propagate_scores(&f0, &adj, 2), f0);
    }

    #[test]
    fn propagation_zeroes_isolated_nodes() {
        let adj = Adjacency::from_edges(3, [(0, 1)]).unwrap();
        let f0 = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(propagate_scores(&f0, &adj, 1).row(2), &[0.0]);
    }

    #[test]
    fn estimate_score_fixed_points() {
        let mut m = model_with(1, 1, 2);
        assert_eq!(estimate_score(&[3.0, -1.0], 5, &m), 0.5);
        m.lambda = 1.0;
        // D_u = 0, α = 1: ln 1 = 0
        assert_eq!(estimate_score(&[3.0, -1.0], 0, &m), 0.5);
        for d in [0, 1, 10, 1000] {
            let s = estimate_score(&[30.0, 1.0], d, &m);
            assert!(s > 0.0 && s <= 1.0);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_importance(&[0.1, 0.9, 0.5]).unwrap().ranks, vec![1, 3, 2]);
        assert_eq!(rank_importance(&[0.4; 4]).unwrap().ranks, vec![1, 2, 3, 4]);
        assert!(rank_importance(&[0.1, f64::NAN]).is_err());
    }

    #[test]
    fn pagerank_sums_to_one_and_favours_hub() {
        let adj = Adjacency::from_edges(5, [(0, 1), (0, 2), (0, 3), (3, 4)]).unwrap();
        let pr = pagerank(&adj, 0.85);
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pr[0] > pr[1] && pr[0] > pr[4]);
        let nm = min_max_normalize(&pr);
        assert_eq!(nm[0], 1.0);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
