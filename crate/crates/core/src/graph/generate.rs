use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Adjacency, Graph};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

/// Synthetic power-law graph with planted homophilous labels.
///
/// Topology is Barabási–Albert preferential attachment: the first new node
/// links to the `attach` seed nodes, every later node links to `attach`
/// distinct nodes drawn proportionally to degree. With probability
/// `homophily` each draw is restricted to nodes sharing the new node's label.
///
/// Features are bag-of-words counts over `d` words. Class `c` owns a block of
/// `d / classes` words; each of a node's `words_per_node` draws comes from its
/// class block with probability `class_word_prob` and from the whole
/// vocabulary otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawParams {
    pub n: usize,
    pub attach: usize,
    pub d: usize,
    pub classes: usize,
    pub homophily: f64,
    pub words_per_node: usize,
    pub class_word_prob: f64,
}

impl PowerLawParams {
    pub fn new(n: usize, attach: usize, d: usize, classes: usize, homophily: f64) -> Self {
        Self {
            n,
            attach,
            d,
            classes,
            homophily,
            words_per_node: 8,
            class_word_prob: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.attach < 1 || self.n <= self.attach {
            return Err(Error::invalid(format!(
                "need n > attach >= 1, got n={} attach={}",
                self.n, self.attach
            )));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::invalid("homophily must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.class_word_prob) {
            return Err(Error::invalid("class_word_prob must lie in [0, 1]"));
        }
        if self.classes < 1 || self.d < self.classes {
            return Err(Error::invalid("need 1 <= classes <= d"));
        }
        if self.words_per_node == 0 {
            return Err(Error::invalid("words_per_node must be positive"));
        }
        Ok(())
    }
}

pub fn generate_power_law(params: &PowerLawParams, seed: u64) -> Result<Graph> {
    params.validate()?;
    let PowerLawParams {
        n,
        attach,
        classes,
        homophily,
        ..
    } = *params;

    let mut label_rng = stream_rng(seed, "gen-labels");
    let labels: Vec<usize> = (0..n).map(|_| label_rng.random_range(0..classes)).collect();

    let mut rng = stream_rng(seed, "gen-edges");
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(attach * (n - attach));
    // Each node appears once per incident edge: uniform draws from these
    // pools are degree-proportional.
    let mut pool: Vec<usize> = Vec::new();
    let mut pool_by_label: Vec<Vec<usize>> = vec![Vec::new(); classes];
    let mut targets: Vec<usize> = (0..attach).collect();

    for source in attach..n {
        for &t in &targets {
            edges.push((source, t));
            pool.push(t);
            pool_by_label[labels[t]].push(t);
        }
        for _ in 0..attach {
            pool.push(source);
            pool_by_label[labels[source]].push(source);
        }
        if source + 1 == n {
            break;
        }
        let next = source + 1;
        targets.clear();
        while targets.len() < attach {
            let same = &pool_by_label[labels[next]];
            let mut pick = None;
            if rng.random::<f64>() < homophily && !same.is_empty() {
                for _ in 0..64 {
                    let c = same[rng.random_range(0..same.len())];
                    if !targets.contains(&c) {
                        pick = Some(c);
                        break;
                    }
                }
            }
            let pick = match pick {
                Some(p) => p,
                None => loop {
                    let c = pool[rng.random_range(0..pool.len())];
                    if !targets.contains(&c) {
                        break c;
                    }
                },
            };
            targets.push(pick);
        }
    }
    let adjacency = Adjacency::from_edges(n, edges)?;

    let features = class_features(params, &labels, seed);
    Graph::new(
        adjacency,
        features,
        labels.into_iter().map(Some).collect(),
        classes,
    )
}

fn class_features(params: &PowerLawParams, labels: &[usize], seed: u64) -> Matrix {
    let block = params.d / params.classes;
    let mut rng = stream_rng(seed, "gen-features");
    let mut x = Matrix::zeros(labels.len(), params.d);
    for (u, &c) in labels.iter().enumerate() {
        for _ in 0..params.words_per_node {
            let word = if rng.random::<f64>() < params.class_word_prob {
                c * block + rng.random_range(0..block)
            } else {
                rng.random_range(0..params.d)
            };
            x[(u, word)] += 1.0;
        }
    }
    x
}

/// Fraction of edges joining two nodes with the same (known) label.
pub fn edge_homophily(g: &Graph) -> f64 {
    let (mut same, mut total) = (0usize, 0usize);
    for (u, v) in g.adjacency.edges() {
        if let (Some(a), Some(b)) = (g.labels[u], g.labels[v]) {
            total += 1;
            same += usize::from(a == b);
        }
    }
    if total == 0 {
        0.0
    } else {
        same as f64 / total as f64
    }
}
