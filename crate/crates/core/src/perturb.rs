//! The three randomizers: Laplace noise on the first sum aggregation, edge
//! randomization followed by degree-preserving sampling, and randomized
//! response on labels.
//!
//! All three are deterministic functions of their inputs and a master seed.
//! Each node (or adjacency row) draws from its own substream.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::budget::BudgetPlan;
use crate::error::{Error, Result};
use crate::graph::{check_normalized, Adjacency, Graph};
use crate::matrix::Matrix;
use crate::rng::indexed_rng;

/// Noised first-layer aggregation `H̄⁰`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedAggregation {
    pub h0: Matrix,
}

/// `A·X`: the exact first sum aggregation.
pub fn sum_aggregate(adj: &Adjacency, features: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(adj.n(), features.cols());
    for u in 0..adj.n() {
        let row = out.row_mut(u);
        for &v in adj.neighbors(u) {
            for (o, x) in row.iter_mut().zip(features.row(v)) {
                *o += x;
            }
        }
    }
    out
}

/// One draw from `Lap(0, scale)`, as the difference of two unit exponentials.
pub fn laplace<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    scale * (a - b)
}

/// `H̄⁰_u = Σ_j a_uj·x_j + Lap(2·D_max / ε_u)` independently per coordinate.
pub fn laplace_aggregate(g: &Graph, plan: &BudgetPlan, seed: u64) -> Result<PerturbedAggregation> {
    check_normalized(&g.features)?;
    if plan.eps_u.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: plan.eps_u.len(),
        });
    }
    if let Some(u) = (0..g.n()).find(|&u| g.adjacency.degree(u) > plan.d_max) {
        return Err(Error::DegreeBound {
            node: u,
            degree: g.adjacency.degree(u),
            d_max: plan.d_max,
        });
    }
    let mut h0 = sum_aggregate(&g.adjacency, &g.features);
    add_laplace_rows(&mut h0, plan, seed);
    Ok(PerturbedAggregation { h0 })
}

/// Adds `Lap(sensitivity / ε_u)` to every entry of row `u`, in place.
pub(crate) fn add_laplace_rows(h: &mut Matrix, plan: &BudgetPlan, seed: u64) {
    for u in 0..h.rows() {
        let scale = plan.sensitivity / plan.eps_u[u];
        let mut rng = indexed_rng(seed, "laplace", u as u64);
        for v in h.row_mut(u) {
            *v += laplace(&mut rng, scale);
        }
    }
}

/// Adjacency after edge randomization (and optionally sampling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyAdjacency {
    pub adjacency: Adjacency,
    /// Probability that an entry keeps its true bit before the fair coin.
    pub keep_prob: f64,
    pub eps_b: f64,
    pub sampled: bool,
}

impl NoisyAdjacency {
    /// Probability that an entry is replaced by a fair coin flip.
    pub fn resample_prob(&self) -> f64 {
        1.0 - self.keep_prob
    }
}

/// Keep probability giving exactly `ε_B`-edge DP:
/// `1 − 2/(e^ε + 1) = tanh(ε/2)`.
pub fn keep_probability(eps_b: f64) -> f64 {
    (eps_b / 2.0).tanh()
}

/// Randomize every off-diagonal pair under budget `eps_b`.
pub fn edge_randomize(adj: &Adjacency, eps_b: f64, seed: u64) -> Result<NoisyAdjacency> {
    if !(eps_b > 0.0) {
        return Err(Error::invalid(format!("eps_B must be positive, got {eps_b}")));
    }
    let mut noisy = randomize_with_keep(adj, keep_probability(eps_b), seed);
    noisy.eps_b = eps_b;
    Ok(noisy)
}

/// Each upper-triangular pair keeps its bit with probability `keep`, and is
/// otherwise replaced by a fair coin; the result is mirrored.
pub fn randomize_with_keep(adj: &Adjacency, keep: f64, seed: u64) -> NoisyAdjacency {
    let n = adj.n();
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    for u in 0..n {
        let mut rng = indexed_rng(seed, "edge", u as u64);
        let neigh = adj.neighbors(u);
        let mut cursor = neigh.partition_point(|&v| v <= u);
        for v in u + 1..n {
            let truth = cursor < neigh.len() && neigh[cursor] == v;
            if truth {
                cursor += 1;
            }
            let bit = if rng.random::<f64>() < keep {
                truth
            } else {
                rng.random::<bool>()
            };
            if bit {
                lists[u].push(v);
                lists[v].push(u);
            }
        }
    }
    // Rows were filled in increasing order of the other endpoint for v > u,
    // and entries from smaller u arrive in increasing order too.
    NoisyAdjacency {
        adjacency: Adjacency::from_sorted_lists(lists),
        keep_prob: keep,
        eps_b: if keep >= 1.0 {
            f64::INFINITY
        } else {
            ((1.0 + keep) / (1.0 - keep)).ln()
        },
        sampled: false,
    }
}

/// `p_u = 2·D_u / (D_u + N − N·s + D_u·s)` with `s` the keep probability.
pub fn sample_probability(degree: usize, n: usize, keep: f64) -> f64 {
    let d = degree as f64;
    let nn = n as f64;
    let denom = d + nn - nn * keep + d * keep;
    if denom <= 0.0 {
        1.0
    } else {
        2.0 * d / denom
    }
}

/// Keep each noisy edge `(u, v)` with probability `min(1, √(p_u·p_v))`,
/// where `p` uses the original (pre-randomization) degrees.
pub fn degree_preserving_sample(
    noisy: &NoisyAdjacency,
    original_degrees: &[usize],
    seed: u64,
) -> Result<NoisyAdjacency> {
    let n = noisy.adjacency.n();
    if original_degrees.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: original_degrees.len(),
        });
    }
    let p: Vec<f64> = original_degrees
        .iter()
        .map(|&d| sample_probability(d, n, noisy.keep_prob))
        .collect();
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    for u in 0..n {
        let mut rng = indexed_rng(seed, "edge-sample", u as u64);
        for &v in noisy.adjacency.neighbors(u).iter().filter(|&&v| v > u) {
            let q = (p[u] * p[v]).sqrt().min(1.0);
            if rng.random::<f64>() < q {
                lists[u].push(v);
                lists[v].push(u);
            }
        }
    }
    Ok(NoisyAdjacency {
        adjacency: Adjacency::from_sorted_lists(lists),
        sampled: true,
        ..noisy.clone()
    })
}

/// Exact expected degree of every node after randomization with `keep` and
/// degree-preserving sampling:
/// `Σ_{v≠u} P(Ā_uv = 1)·min(1, √(p_u·p_v))` with
/// `P(Ā_uv = 1) = keep·A_uv + (1 − keep)/2`.
pub fn expected_sampled_degree(adj: &Adjacency, keep: f64, sampled: bool) -> Vec<f64> {
    let n = adj.n();
    let p: Vec<f64> = (0..n)
        .map(|u| sample_probability(adj.degree(u), n, keep))
        .collect();
    (0..n)
        .map(|u| {
            (0..n)
                .filter(|&v| v != u)
                .map(|v| {
                    let present = keep * f64::from(u8::from(adj.has_edge(u, v))) + (1.0 - keep) / 2.0;
                    let q = if sampled {
                        (p[u] * p[v]).sqrt().min(1.0)
                    } else {
                        1.0
                    };
                    present * q
                })
                .sum()
        })
        .collect()
}

/// Labels after randomized response. Only constructible by
/// [`randomized_response`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyLabels {
    labels: Vec<Option<usize>>,
    pub eps_c: f64,
    pub num_classes: usize,
}

impl NoisyLabels {
    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn get(&self, u: usize) -> Option<usize> {
        self.labels[u]
    }
}

/// Probability of reporting the true label: `e^ε / (e^ε + M − 1)`.
pub fn rr_keep_probability(eps_c: f64, m: usize) -> f64 {
    1.0 / (1.0 + (m as f64 - 1.0) * (-eps_c).exp())
}

/// Perturb every present label; `None` entries are left alone. A label is
/// kept with probability `e^ε/(e^ε+M−1)` and otherwise replaced by one of the
/// other `M − 1` classes uniformly.
pub fn randomized_response(
    labels: &[Option<usize>],
    eps_c: f64,
    m: usize,
    seed: u64,
) -> Result<NoisyLabels> {
    if m < 2 {
        return Err(Error::invalid("randomized response needs at least 2 classes"));
    }
    if !(eps_c >= 0.0) {
        return Err(Error::invalid(format!("eps_C must be non-negative, got {eps_c}")));
    }
    let keep = rr_keep_probability(eps_c, m);
    let labels = labels
        .iter()
        .enumerate()
        .map(|(u, l)| {
            l.map(|y| {
                if y >= m {
                    return Err(Error::invalid(format!("label {y} outside 0..{m}")));
                }
                let mut rng = indexed_rng(seed, "rr", u as u64);
                if rng.random::<f64>() < keep {
                    Ok(y)
                } else {
                    let j = rng.random_range(0..m - 1);
                    Ok(if j >= y { j + 1 } else { j })
                }
            })
            .transpose()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoisyLabels {
        labels,
        eps_c,
        num_classes: m,
    })
}

/// Identity "randomizer" used only by the unaccounted debug mode.
pub(crate) fn clean_labels(labels: &[Option<usize>], m: usize) -> NoisyLabels {
    NoisyLabels {
        labels: labels.to_vec(),
        eps_c: f64::INFINITY,
        num_classes: m,
    }
}
