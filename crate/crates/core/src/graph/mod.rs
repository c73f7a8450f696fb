//! Graph representation and preprocessing.
//!
//! Graphs are undirected and unweighted. Adjacency is stored as sorted
//! neighbor lists with no self-loops; self-loops appear only inside
//! [`sym_norm_adj`].

mod generate;
mod io;

pub use generate::{edge_homophily, generate_power_law, PowerLawParams};
pub use io::{load_graph, load_importance, write_dataset};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SparseMatrix};
use crate::rng::{indexed_rng, stream_rng};

/// Symmetric 0/1 adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
        }
    }

    /// Duplicate pairs are merged; self-loops and out-of-range ids are errors.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = Self::empty(n);
        for (u, v) in edges {
            if u >= n {
                return Err(Error::NodeOutOfRange { id: u, n });
            }
            if v >= n {
                return Err(Error::NodeOutOfRange { id: v, n });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            adj.neighbors[u].push(v);
            adj.neighbors[v].push(u);
        }
        for list in &mut adj.neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(adj)
    }

    /// Build from neighbor lists that are already symmetric and loop-free.
    pub(crate) fn from_sorted_lists(neighbors: Vec<Vec<usize>>) -> Self {
        debug_assert!(neighbors
            .iter()
            .enumerate()
            .all(|(u, l)| !l.contains(&u) && l.windows(2).all(|w| w[0] < w[1])));
        Self { neighbors }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.neighbors[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        let Ok(i) = self.neighbors[u].binary_search(&v) else {
            return false;
        };
        self.neighbors[u].remove(i);
        if let Ok(j) = self.neighbors[v].binary_search(&u) {
            self.neighbors[v].remove(j);
        }
        true
    }

    pub fn is_symmetric(&self) -> bool {
        self.neighbors
            .iter()
            .enumerate()
            .all(|(u, l)| l.iter().all(|&v| v != u && self.has_edge(v, u)))
    }
}

/// Undirected graph with node features and optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub adjacency: Adjacency,
    pub features: Matrix,
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
}

impl Graph {
    pub fn new(
        adjacency: Adjacency,
        features: Matrix,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = adjacency.n();
        if features.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: features.rows(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().flatten().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        Ok(Self {
            adjacency,
            features,
            labels,
            num_classes,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.degrees()
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&u| self.labels[u].is_some()).collect()
    }

    /// Copy with features replaced by their row-normalized form.
    pub fn normalized(&self) -> Result<Self> {
        Ok(Self {
            features: row_normalize(&self.features)?,
            ..self.clone()
        })
    }
}

/// Divide each nonzero row by its L1 norm. Zero rows stay zero.
pub fn row_normalize(features: &Matrix) -> Result<Matrix> {
    let mut out = features.clone();
    for u in 0..out.rows() {
        let row = out.row_mut(u);
        if let Some((col, &value)) = row.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeFeature {
                node: u,
                col,
                value,
            });
        }
        let norm: f64 = row.iter().sum();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(out)
}

/// Every row non-negative with L1 norm at most 1 (within `1e-9`).
pub fn check_normalized(features: &Matrix) -> Result<()> {
    for u in 0..features.rows() {
        let row = features.row(u);
        if let Some((col, &value)) = row.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeFeature {
                node: u,
                col,
                value,
            });
        }
        let norm: f64 = row.iter().sum();
        if norm > 1.0 + 1e-9 {
            return Err(Error::NotNormalized { node: u, norm });
        }
    }
    Ok(())
}

/// Subsample incident edges of over-full nodes until every degree is at most
/// `d_max`. Nodes are visited in id order; a node with excess degree drops a
/// uniformly random subset of its current edges.
pub fn bound_degree(g: &Graph, d_max: usize, seed: u64) -> Result<Graph> {
    if d_max == 0 {
        return Err(Error::invalid("D_max must be at least 1"));
    }
    let mut adjacency = g.adjacency.clone();
    for u in 0..adjacency.n() {
        let deg = adjacency.degree(u);
        if deg <= d_max {
            continue;
        }
        let mut rng = indexed_rng(seed, "degree-bound", u as u64);
        let mut incident = adjacency.neighbors(u).to_vec();
        incident.shuffle(&mut rng);
        for &v in &incident[..deg - d_max] {
            adjacency.remove_edge(u, v);
        }
    }
    Ok(Graph {
        adjacency,
        ..g.clone()
    })
}

/// `D̂^{-1/2} (A + I) D̂^{-1/2}` where `D̂` counts the added self-loop.
pub fn sym_norm_adj(adj: &Adjacency) -> SparseMatrix {
    let inv_sqrt: Vec<f64> = (0..adj.n())
        .map(|u| 1.0 / ((adj.degree(u) + 1) as f64).sqrt())
        .collect();
    let rows = (0..adj.n())
        .map(|u| {
            let mut row = Vec::with_capacity(adj.degree(u) + 1);
            row.push((u, inv_sqrt[u] * inv_sqrt[u]));
            row.extend(adj.neighbors(u).iter().map(|&v| (v, inv_sqrt[u] * inv_sqrt[v])));
            row
        })
        .collect();
    SparseMatrix::from_rows(rows)
}

/// Disjoint train/validation/test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Train and validation nodes: the labels treated as known.
    pub fn known(&self) -> Vec<usize> {
        let mut k: Vec<usize> = self.train.iter().chain(&self.val).copied().collect();
        k.sort_unstable();
        k
    }
}

/// Stratified random split of the labeled nodes.
///
/// Per class, each split receives `floor(count · ratio)` nodes plus at most
/// one leftover node, and the leftovers are distributed so that the global
/// split sizes follow largest-remainder rounding of `labeled · ratio`.
pub fn split_nodes(g: &Graph, ratios: [f64; 3], seed: u64) -> Result<Splits> {
    if ratios.iter().any(|r| *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let active = ratios.iter().filter(|r| **r > 0.0).count();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); g.num_classes];
    for (u, l) in g.labels.iter().enumerate() {
        if let Some(l) = l {
            by_class[*l].push(u);
        }
    }
    for (class, nodes) in by_class.iter().enumerate() {
        if !nodes.is_empty() && nodes.len() < active {
            return Err(Error::ClassTooSmall {
                class,
                count: nodes.len(),
                splits: active,
            });
        }
    }
    let total: usize = by_class.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Empty("labeled node set"));
    }

    let targets = largest_remainder(total, &ratios);
    let floors: Vec<[usize; 3]> = by_class
        .iter()
        .map(|nodes| {
            let c = nodes.len() as f64;
            [
                (c * ratios[0]).floor() as usize,
                (c * ratios[1]).floor() as usize,
                (c * ratios[2]).floor() as usize,
            ]
        })
        .collect();
    let mut slack = [0usize; 3];
    for j in 0..3 {
        let used: usize = floors.iter().map(|f| f[j]).sum();
        slack[j] = targets[j].saturating_sub(used);
    }

    // Distribute each class's leftovers, one per split at most, to the splits
    // with the largest remaining slack (classes with most leftovers first).
    let mut counts = floors.clone();
    let mut order: Vec<usize> = (0..by_class.len()).collect();
    let leftover = |c: usize| by_class[c].len() - floors[c].iter().sum::<usize>();
    order.sort_by_key(|&c| (std::cmp::Reverse(leftover(c)), c));
    for c in order {
        let mut split_order = [0usize, 1, 2];
        split_order.sort_by_key(|&j| (std::cmp::Reverse(slack[j]), j));
        let mut remaining = leftover(c);
        for &j in split_order.iter().filter(|&&j| ratios[j] > 0.0) {
            if remaining == 0 {
                break;
            }
            counts[c][j] += 1;
            slack[j] = slack[j].saturating_sub(1);
            remaining -= 1;
        }
        // Only reachable with degenerate ratios; keep every node assigned.
        if remaining > 0 {
            let j = (0..3).max_by(|&a, &b| ratios[a].total_cmp(&ratios[b])).unwrap_or(0);
            counts[c][j] += remaining;
        }
    }

    let mut rng = stream_rng(seed, "split");
    let mut splits = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (c, nodes) in by_class.iter().enumerate() {
        let mut shuffled = nodes.clone();
        shuffled.shuffle(&mut rng);
        let [a, b, _] = counts[c];
        splits.train.extend_from_slice(&shuffled[..a]);
        splits.val.extend_from_slice(&shuffled[a..a + b]);
        splits.test.extend_from_slice(&shuffled[a + b..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    Ok(splits)
}

fn largest_remainder(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut out = [0usize; 3];
    for j in 0..3 {
        out[j] = raw[j].floor() as usize;
    }
    let mut rest = total - out.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        (raw[b] - raw[b].floor())
            .total_cmp(&(raw[a] - raw[a].floor()))
            .then(a.cmp(&b))
    });
    for &j in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if ratios[j] > 0.0 {
            out[j] += 1;
            rest -= 1;
        }
    }
    out
}
