//! Empirical checks of the privacy and unbiasedness properties.
//!
//! Each check returns an [`AuditReport`] that is reproducible from its seed
//! and serializes to JSON.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::budget::{
    allocate, bound_lhs, weight_coefficients, BetaRule, BudgetPlan,
};
use crate::classifier::head_loss_and_grad;
use crate::error::{Error, Result};
use crate::graph::{
    bound_degree, generate_power_law, row_normalize, Adjacency, Graph, PowerLawParams,
};
use crate::matrix::Matrix;
use crate::nn::Mlp;
use crate::perturb::{
    degree_preserving_sample, edge_randomize, expected_sampled_degree, keep_probability,
    laplace_aggregate, randomized_response, rr_keep_probability, sample_probability,
    sum_aggregate,
};
use crate::rng::{derive_seed, stream_rng};
use crate::tnie::{self, TnieConfig, TnieModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub claim: String,
    pub estimate: f64,
    pub bound: f64,
    pub passed: bool,
    pub trials: usize,
    pub seed: u64,
    pub details: serde_json::Value,
}

pub fn write_reports(path: impl AsRef<Path>, reports: &[AuditReport]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(f, reports)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Neighboring graphs
// ---------------------------------------------------------------------------

/// Two graphs on the same node set that differ only at node `altered`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPair {
    pub g: Graph,
    pub g_prime: Graph,
    pub altered: usize,
}

impl NeighborPair {
    /// `G′` drops every edge incident to `k` and zeroes its features; the
    /// node id stays so outputs remain aligned.
    pub fn removal(g: &Graph, k: usize) -> Self {
        let mut adjacency = g.adjacency.clone();
        for v in g.adjacency.neighbors(k).to_vec() {
            adjacency.remove_edge(k, v);
        }
        let mut features = g.features.clone();
        features.row_mut(k).iter_mut().for_each(|x| *x = 0.0);
        Self {
            g: g.clone(),
            g_prime: Graph {
                adjacency,
                features,
                ..g.clone()
            },
            altered: k,
        }
    }

    /// `G′` replaces node `k`'s feature row.
    pub fn replacement(g: &Graph, k: usize, row: &[f64]) -> Self {
        let mut features = g.features.clone();
        features.row_mut(k).copy_from_slice(row);
        Self {
            g: g.clone(),
            g_prime: Graph {
                features,
                ..g.clone()
            },
            altered: k,
        }
    }

    /// Identical graphs, for calibrating the estimators.
    pub fn identical(g: &Graph) -> Self {
        Self {
            g: g.clone(),
            g_prime: g.clone(),
            altered: 0,
        }
    }

    /// `Σ_u ‖H⁰(G)_u − H⁰(G′)_u‖₁`.
    pub fn aggregation_distance(&self) -> f64 {
        let a = sum_aggregate(&self.g.adjacency, &self.g.features);
        let b = sum_aggregate(&self.g_prime.adjacency, &self.g_prime.features);
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum()
    }
}

fn random_graph<R: Rng>(n: usize, d: usize, rng: &mut R) -> Graph {
    let p: f64 = rng.random();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let adjacency = Adjacency::from_edges(n, edges).expect("generated edges are valid");
    let mut x = Matrix::zeros(n, d);
    for u in 0..n {
        let mass: f64 = if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random() };
        let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        for (j, r) in raw.iter().enumerate() {
            x[(u, j)] = if s > 0.0 { mass * r / s } else { 0.0 };
        }
    }
    Graph::new(adjacency, x, vec![None; n], 1).expect("consistent shapes")
}

// ---------------------------------------------------------------------------
// Sensitivity of the first sum aggregation
// ---------------------------------------------------------------------------

/// Random graphs with at most `n_max` nodes, every single-node removal and a
/// set of single-node feature replacements (zero row, every basis vector,
/// a random normalized row). Checks `Δ ≤ 2·D_max` for both neighbor
/// relations and reports both maxima.
pub fn brute_force_sensitivity(n_max: usize, d: usize, trials: usize, seed: u64) -> Result<AuditReport> {
    if !(2..=8).contains(&n_max) {
        return Err(Error::invalid("brute-force sensitivity needs 2 <= n_max <= 8"));
    }
    if d == 0 {
        return Err(Error::invalid("feature dimension must be positive"));
    }
    let mut rng = stream_rng(seed, "audit-sensitivity");
    let (mut max_removal, mut max_replacement, mut max_ratio) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut violations = 0usize;
    let mut pairs = 0usize;
    for _ in 0..trials {
        let n = rng.random_range(2..=n_max);
        let g = random_graph(n, d, &mut rng);
        let d_max = rng.random_range(1..n.max(2));
        let g = bound_degree(&g, d_max, rng.random())?;
        let bound = 2.0 * d_max as f64;

        let mut candidates: Vec<Vec<f64>> = vec![vec![0.0; d]];
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            candidates.push(e);
        }
        let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-9).collect();
        let s: f64 = raw.iter().sum();
        candidates.push(raw.iter().map(|r| r / s).collect());

        for k in 0..n {
            let mut check = |delta: f64| {
                pairs += 1;
                max_ratio = max_ratio.max(delta / bound);
                if delta > bound + 1e-9 {
                    violations += 1;
                }
            };
            let removal = NeighborPair::removal(&g, k).aggregation_distance();
            max_removal = max_removal.max(removal);
            check(removal);
            for c in &candidates {
                let rep = NeighborPair::replacement(&g, k, c).aggregation_distance();
                max_replacement = max_replacement.max(rep);
                check(rep);
            }
        }
    }
    Ok(AuditReport {
        claim: "first-layer sum aggregation has L1 sensitivity <= 2*D_max".into(),
        estimate: max_ratio,
        bound: 1.0,
        passed: violations == 0,
        trials,
        seed,
        details: json!({
            "neighbor_pairs": pairs,
            "violations": violations,
            "max_delta_node_removal": max_removal,
            "max_delta_feature_replacement": max_replacement,
            "max_delta_over_bound": max_ratio,
        }),
    })
}

// ---------------------------------------------------------------------------
// Budget bound
// ---------------------------------------------------------------------------

/// Random graphs and rank permutations; checks
/// `D_k·β_k + Σ_{i∈N(k)} β_i ≤ 2·D_max` and `β ≥ 1` at every node.
pub fn budget_bound_sweep(trials: usize, n_max: usize, rule: BetaRule, seed: u64) -> Result<AuditReport> {
    if n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    let mut rng = stream_rng(seed, "audit-budget");
    let mut bound_violations = 0usize;
    let mut beta_violations = 0usize;
    let mut worst_ratio = 0.0_f64;
    let mut nodes_checked = 0usize;
    let mut min_beta = f64::INFINITY;
    for t in 0..trials {
        let n = rng.random_range(2..=n_max);
        // alternate dense-ish random graphs with power-law ones
        let g = if t % 2 == 0 || n < 4 {
            random_graph(n, 1, &mut rng)
        } else {
            let attach = rng.random_range(1..=3.min(n - 1));
            generate_power_law(&PowerLawParams::new(n, attach, 2, 1, 0.0), rng.random())?
        };
        let d_max = rng.random_range(1..=n);
        let g = bound_degree(&g, d_max, rng.random())?;
        let mut ranks: Vec<usize> = (1..=n).collect();
        ranks.shuffle(&mut rng);
        let beta = weight_coefficients(&g.adjacency, &ranks, d_max, rule)?;
        let lhs = bound_lhs(&g.adjacency, &beta);
        let cap = 2.0 * d_max as f64;
        for (l, b) in lhs.iter().zip(&beta) {
            nodes_checked += 1;
            worst_ratio = worst_ratio.max(l / cap);
            min_beta = min_beta.min(*b);
            if *l > cap + 1e-9 {
                bound_violations += 1;
            }
            if *b < 1.0 - 1e-12 {
                beta_violations += 1;
            }
        }
    }
    Ok(AuditReport {
        claim: "D_k*beta_k + sum_{i in N(k)} beta_i <= 2*D_max and beta >= 1".into(),
        estimate: worst_ratio,
        bound: 1.0,
        passed: bound_violations == 0 && beta_violations == 0,
        trials,
        seed,
        details: json!({
            "rule": format!("{rule:?}"),
            "nodes_checked": nodes_checked,
            "bound_violations": bound_violations,
            "beta_below_one": beta_violations,
            "min_beta": min_beta,
            "max_lhs_over_2dmax": worst_ratio,
        }),
    })
}

// ---------------------------------------------------------------------------
// Monte-Carlo privacy ratio
// ---------------------------------------------------------------------------

/// Bins need at least this many hits in both histograms to count.
pub const MIN_BIN_HITS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRatio {
    pub log_ratio: f64,
    pub slack: f64,
}

/// Histogram two samples over `[lo, hi]`; returns `|ln(c₁/c₂)|` and its
/// `3σ` slack `3·√(1/c₁ + 1/c₂)` for every bin where both counts reach
/// [`MIN_BIN_HITS`].
pub fn histogram_ratios(a: &[f64], b: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<BinRatio> {
    let width = (hi - lo) / bins as f64;
    let fill = |xs: &[f64]| {
        let mut h = vec![0u64; bins];
        for &x in xs {
            if x >= lo && x <= hi {
                let i = (((x - lo) / width) as usize).min(bins - 1);
                h[i] += 1;
            }
        }
        h
    };
    let (ha, hb) = (fill(a), fill(b));
    ha.iter()
        .zip(&hb)
        .filter(|(x, y)| **x >= MIN_BIN_HITS && **y >= MIN_BIN_HITS)
        .map(|(&x, &y)| {
            let (x, y) = (x as f64, y as f64);
            BinRatio {
                log_ratio: (x / y).ln().abs(),
                slack: 3.0 * (1.0 / x + 1.0 / y).sqrt(),
            }
        })
        .collect()
}

/// Run the noised aggregation `trials` times on both graphs of `pair` with
/// the same budget plan and estimate the privacy loss from histogram ratios.
///
/// Two families of test statistics are histogrammed: every output
/// coordinate (equal-width bins over the central `±6b` range around the two
/// true values), and the log-likelihood ratio of the full output, which is
/// the most powerful single distinguisher. Both are post-processing of the
/// released matrix. The check passes when every qualifying bin satisfies
/// `|ln ratio| ≤ ε_A + 3σ`.
pub fn mc_privacy_ratio(
    pair: &NeighborPair,
    plan: &BudgetPlan,
    bins: usize,
    trials: usize,
    seed: u64,
) -> Result<AuditReport> {
    if bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    let n = pair.g.n();
    let d = pair.g.feature_dim();
    if pair.g_prime.n() != n || pair.g_prime.feature_dim() != d {
        return Err(Error::invalid("neighbor graphs are not aligned"));
    }
    let exact_g = sum_aggregate(&pair.g.adjacency, &pair.g.features);
    let exact_p = sum_aggregate(&pair.g_prime.adjacency, &pair.g_prime.features);
    let weights: Vec<f64> = plan.eps_u.iter().map(|e| e / plan.sensitivity).collect();
    let llr = |y: &Matrix| -> f64 {
        let mut s = 0.0;
        for u in 0..n {
            for j in 0..d {
                s += weights[u] * ((y[(u, j)] - exact_p[(u, j)]).abs() - (y[(u, j)] - exact_g[(u, j)]).abs());
            }
        }
        s
    };

    let coords = n * d;
    let mut samples_g = vec![Vec::with_capacity(trials); coords + 1];
    let mut samples_p = vec![Vec::with_capacity(trials); coords + 1];
    let base_g = derive_seed(seed, "mc-g");
    let base_p = derive_seed(seed, "mc-g-prime");
    for t in 0..trials as u64 {
        let yg = laplace_aggregate(&pair.g, plan, base_g.wrapping_add(t))?.h0;
        let yp = laplace_aggregate(&pair.g_prime, plan, base_p.wrapping_add(t))?.h0;
        for (c, (a, b)) in yg.as_slice().iter().zip(yp.as_slice()).enumerate() {
            samples_g[c].push(*a);
            samples_p[c].push(*b);
        }
        samples_g[coords].push(llr(&yg));
        samples_p[coords].push(llr(&yp));
    }

    let mut all = Vec::new();
    let mut per_stat = Vec::new();
    for c in 0..coords {
        let u = c / d;
        let b = plan.sensitivity / plan.eps_u[u];
        let mid = 0.5 * (exact_g.as_slice()[c] + exact_p.as_slice()[c]);
        let r = histogram_ratios(&samples_g[c], &samples_p[c], mid - 6.0 * b, mid + 6.0 * b, bins);
        per_stat.push(json!({
            "statistic": format!("coordinate({u},{})", c % d),
            "qualifying_bins": r.len(),
            "max_log_ratio": r.iter().map(|x| x.log_ratio).fold(0.0, f64::max),
        }));
        all.extend(r);
    }
    let l_max: f64 = (0..coords)
        .map(|c| weights[c / d] * (exact_g.as_slice()[c] - exact_p.as_slice()[c]).abs())
        .sum();
    let span = l_max.max(1e-9) * (1.0 + 1e-6);
    let r = histogram_ratios(&samples_g[coords], &samples_p[coords], -span, span, bins);
    per_stat.push(json!({
        "statistic": "log_likelihood_ratio",
        "qualifying_bins": r.len(),
        "max_log_ratio": r.iter().map(|x| x.log_ratio).fold(0.0, f64::max),
        "theoretical_max_privacy_loss": l_max,
    }));
    all.extend(r);

    if all.is_empty() {
        return Err(Error::Audit(format!(
            "insufficient bin mass: no bin reached {MIN_BIN_HITS} hits in both histograms"
        )));
    }
    let worst = all
        .iter()
        .copied()
        .max_by(|a, b| a.log_ratio.total_cmp(&b.log_ratio))
        .expect("non-empty");
    let violations = all
        .iter()
        .filter(|r| r.log_ratio > plan.eps_a + r.slack)
        .count();
    Ok(AuditReport {
        claim: "noised first aggregation is eps_A-indistinguishable on the neighbor pair".into(),
        estimate: worst.log_ratio,
        bound: plan.eps_a,
        passed: violations == 0,
        trials,
        seed,
        details: json!({
            "eps_A": plan.eps_a,
            "slack_at_max": worst.slack,
            "bins": bins,
            "qualifying_bins": all.len(),
            "bins_over_bound": violations,
            "altered_node": pair.altered,
            "statistics": per_stat,
        }),
    })
}

/// The four-node star `K₁,₃` with unit scalar features and `D_max = 3`,
/// paired with the graph that has its center removed. Every node gets
/// `β = 1`, and the privacy loss of this pair reaches exactly `ε_A`.
pub fn star_pair_fixture(eps_a: f64) -> Result<(NeighborPair, BudgetPlan)> {
    let adj = Adjacency::from_edges(4, [(0, 1), (0, 2), (0, 3)])?;
    let g = Graph::new(adj, Matrix::from_vec(4, 1, vec![1.0; 4]), vec![None; 4], 1)?;
    let ranks = [4, 1, 2, 3];
    let beta = weight_coefficients(&g.adjacency, &ranks, 3, BetaRule::OwnDegreeCap)?;
    let plan = allocate(eps_a, beta, 3)?;
    Ok((NeighborPair::removal(&g, 0), plan))
}

// ---------------------------------------------------------------------------
// Unbiasedness
// ---------------------------------------------------------------------------

/// Monte-Carlo mean of `H̄⁰` against the exact sum. Passes when every
/// coordinate is within `4·σ/√trials` with `σ = √2·2·D_max/ε_u`.
pub fn laplace_unbiasedness(g: &Graph, plan: &BudgetPlan, trials: usize, seed: u64) -> Result<AuditReport> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let exact = sum_aggregate(&g.adjacency, &g.features);
    let mut mean = Matrix::zeros(exact.rows(), exact.cols());
    let base = derive_seed(seed, "unbiased-laplace");
    for t in 0..trials as u64 {
        let h = laplace_aggregate(g, plan, base.wrapping_add(t))?.h0;
        mean.axpy(1.0, &h);
    }
    mean.scale(1.0 / trials as f64);
    let mut worst = 0.0_f64;
    let mut failures = 0usize;
    for u in 0..exact.rows() {
        let sigma = std::f64::consts::SQRT_2 * plan.sensitivity / plan.eps_u[u];
        let tol = 4.0 * sigma / (trials as f64).sqrt();
        for j in 0..exact.cols() {
            let err = (mean[(u, j)] - exact[(u, j)]).abs();
            worst = worst.max(err / tol);
            if err > tol {
                failures += 1;
            }
        }
    }
    Ok(AuditReport {
        claim: "noised sum aggregation is unbiased".into(),
        estimate: worst,
        bound: 1.0,
        passed: failures == 0,
        trials,
        seed,
        details: json!({
            "coordinates": exact.rows() * exact.cols(),
            "coordinates_outside_4se": failures,
            "max_error_over_tolerance": worst,
        }),
    })
}

/// Empirical mean degree after edge randomization and degree-preserving
/// sampling, against the exact expectation of that process.
///
/// Also reports the ratio of the empirical mean to the original degree. The
/// sampling probability was derived from an expected randomized degree of
/// `0.5·D + 0.5·N − 0.5·N·s + 0.5·D·s`, which counts every true edge as
/// surviving; under keep-or-fair-coin randomization the expectation is
/// `D·s + 0.5·(N − 1)·(1 − s)`, so the sampled degree is not exactly `D`.
pub fn degree_preservation(g: &Graph, eps_b: f64, trials: usize, seed: u64) -> Result<AuditReport> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let n = g.n();
    let degrees = g.degrees();
    let keep = keep_probability(eps_b);
    let analytic = expected_sampled_degree(&g.adjacency, keep, true);
    let mut total = vec![0.0; n];
    let base = derive_seed(seed, "unbiased-degree");
    for t in 0..trials as u64 {
        let s = base.wrapping_add(t);
        let noisy = edge_randomize(&g.adjacency, eps_b, s)?;
        let sampled = degree_preserving_sample(&noisy, &degrees, s ^ 0x5a5a)?;
        for (acc, d) in total.iter_mut().zip(sampled.adjacency.degrees()) {
            *acc += d as f64;
        }
    }
    let empirical: Vec<f64> = total.iter().map(|t| t / trials as f64).collect();
    let mut worst_rel = 0.0_f64;
    let mut ratios = Vec::new();
    for u in 0..n {
        if analytic[u] > 0.0 {
            worst_rel = worst_rel.max((empirical[u] - analytic[u]).abs() / analytic[u]);
        } else if empirical[u] > 0.0 {
            worst_rel = f64::INFINITY;
        }
        if degrees[u] > 0 {
            ratios.push(empirical[u] / degrees[u] as f64);
        }
    }
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_node: Vec<_> = (0..n)
        .map(|u| {
            json!({
                "node": u,
                "degree": degrees[u],
                "sample_probability": sample_probability(degrees[u], n, keep),
                "empirical": empirical[u],
                "analytic": analytic[u],
            })
        })
        .collect();
    Ok(AuditReport {
        claim: "degree-preserving sampling: empirical mean degree matches the process expectation".into(),
        estimate: worst_rel,
        bound: 0.02,
        passed: worst_rel <= 0.02,
        trials,
        seed,
        details: json!({
            "eps_B": eps_b,
            "keep_prob": keep,
            "max_relative_error_vs_analytic": worst_rel,
            "mean_ratio_to_original_degree": mean_ratio,
            "min_ratio_to_original_degree": min_ratio,
            "max_ratio_to_original_degree": max_ratio,
            "exact_degree_preservation_holds": (min_ratio - 1.0).abs() <= 0.02 && (max_ratio - 1.0).abs() <= 0.02,
            "note": "sampling probability assumes E[randomized degree] = 0.5D + 0.5N - 0.5Ns + 0.5Ds; the keep-or-fair-coin process gives Ds + 0.5(N-1)(1-s)",
            "per_node": per_node,
        }),
    })
}

/// Default fixtures for both unbiasedness checks.
pub fn unbiasedness_suite(laplace_trials: usize, degree_trials: usize, seed: u64) -> Result<Vec<AuditReport>> {
    let (g, plan) = laplace_fixture(1.0)?;
    let a = laplace_unbiasedness(&g, &plan, laplace_trials, seed)?;
    let b = degree_preservation(&degree_fixture()?, 2.0, degree_trials, seed)?;
    Ok(vec![a, b])
}

/// Power-law graph (n = 20, D_max = 4, d = 3) with adaptive budgets.
pub fn laplace_fixture(eps_a: f64) -> Result<(Graph, BudgetPlan)> {
    let g = generate_power_law(&PowerLawParams::new(20, 2, 3, 3, 0.5), 17)?;
    let g = bound_degree(&g.normalized()?, 4, 17)?;
    let state = tnie::rank_importance(&g.degrees().iter().map(|&d| d as f64).collect::<Vec<_>>())?;
    let beta = weight_coefficients(&g.adjacency, &state.ranks, 4, BetaRule::OwnDegreeCap)?;
    Ok((g, allocate(eps_a, beta, 4)?))
}

/// Power-law graph (n = 60, attach = 4) for the degree audit.
pub fn degree_fixture() -> Result<Graph> {
    generate_power_law(&PowerLawParams::new(60, 4, 2, 2, 0.5), 23)
}

// ---------------------------------------------------------------------------
// Randomized response
// ---------------------------------------------------------------------------

/// Transition frequencies of randomized response on `trials` labels spread
/// evenly over the classes. Gates on the pooled keep rate and on the pooled
/// frequency of every label offset `(y' − y) mod M`, each within `3σ` of its
/// binomial expectation.
pub fn rr_frequencies(m: usize, eps_c: f64, trials: usize, seed: u64) -> Result<AuditReport> {
    let labels: Vec<Option<usize>> = (0..trials).map(|i| Some(i % m)).collect();
    let out = randomized_response(&labels, eps_c, m, seed)?;
    let mut offset_counts = vec![0u64; m];
    for (y, y2) in labels.iter().zip(out.labels()) {
        let (y, y2) = (y.expect("set"), y2.expect("set"));
        offset_counts[(y2 + m - y) % m] += 1;
    }
    let keep = rr_keep_probability(eps_c, m);
    let other = (1.0 - keep) / (m as f64 - 1.0);
    let t = trials as f64;
    let mut worst_z = 0.0_f64;
    let mut rows = Vec::new();
    for (off, &c) in offset_counts.iter().enumerate() {
        let p = if off == 0 { keep } else { other };
        let sd = (t * p * (1.0 - p)).sqrt();
        let z = if sd > 0.0 { (c as f64 - t * p) / sd } else { 0.0 };
        worst_z = worst_z.max(z.abs());
        rows.push(json!({ "offset": off, "count": c, "expected": t * p, "z": z }));
    }
    Ok(AuditReport {
        claim: format!("randomized response transition frequencies (M={m}, eps_C={eps_c})"),
        estimate: worst_z,
        bound: 3.0,
        passed: worst_z <= 3.0,
        trials,
        seed,
        details: json!({
            "keep_probability": keep,
            "empirical_keep_rate": offset_counts[0] as f64 / t,
            "offsets": rows,
        }),
    })
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn flatten_tnie(m: &TnieModel) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend_from_slice(m.score_net.w1.as_slice());
    v.extend_from_slice(&m.score_net.b1);
    v.extend_from_slice(m.score_net.w2.as_slice());
    v.extend_from_slice(&m.score_net.b2);
    v.push(m.lambda);
    v.push(m.phi);
    v
}

fn unflatten_tnie(m: &mut TnieModel, v: &[f64]) {
    let mut off = 0;
    for slot in m.score_net.params_mut() {
        let len = slot.len();
        slot.copy_from_slice(&v[off..off + len]);
        off += len;
    }
    m.lambda = v[off];
    m.phi = v[off + 1];
}

/// Importance-estimator gradient against central differences at `points`
/// random parameter settings. Relative error is measured on the whole
/// gradient vector; the `λ` component is also reported on its own.
pub fn tnie_gradient_check(points: usize, seed: u64) -> Result<AuditReport> {
    let g = generate_power_law(&PowerLawParams::new(24, 2, 6, 2, 0.5), seed)?;
    let g = Graph {
        features: row_normalize(&g.features)?,
        ..g
    };
    let cfg = TnieConfig {
        hidden: 6,
        embed: 3,
        ..TnieConfig::default()
    };
    let mut rng = stream_rng(seed, "gradcheck-tnie");
    let mut worst = 0.0_f64;
    let mut worst_lambda = 0.0_f64;
    for p in 0..points {
        let mut model = TnieModel::new(g.feature_dim(), &cfg, seed.wrapping_add(p as u64))?;
        let spread: f64 = rng.random_range(0.5..3.0);
        let mut theta = flatten_tnie(&model);
        for v in theta.iter_mut() {
            *v *= spread;
        }
        let last = theta.len();
        theta[last - 2] = rng.random_range(-2.0..2.0);
        theta[last - 1] = rng.random_range(-1.0..1.0);
        unflatten_tnie(&mut model, &theta);
        let mut known = Vec::new();
        for u in 0..g.n() {
            if rng.random::<f64>() < 0.6 {
                known.push((u, rng.random::<f64>()));
            }
        }
        if known.is_empty() {
            continue;
        }
        let (_, grads) = tnie::loss_and_grad(&model, &g, &known)?;
        let mut analytic = Vec::new();
        for s in grads.net.slices() {
            analytic.extend_from_slice(s);
        }
        analytic.push(grads.lambda);
        analytic.push(grads.phi);

        let h = 1e-6;
        let mut numeric = Vec::with_capacity(theta.len());
        let mut probe = model.clone();
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            unflatten_tnie(&mut probe, &t);
            let up = tnie::loss(&probe, &g, &known)?;
            t[i] -= 2.0 * h;
            unflatten_tnie(&mut probe, &t);
            let down = tnie::loss(&probe, &g, &known)?;
            numeric.push((up - down) / (2.0 * h));
        }
        worst = worst.max(relative_error(&analytic, &numeric));
        let (a, f) = (analytic[last - 2], numeric[last - 2]);
        worst_lambda = worst_lambda.max((a - f).abs() / a.abs().max(f.abs()).max(1e-6));
    }
    Ok(AuditReport {
        claim: "importance-estimator analytic gradients match central differences".into(),
        estimate: worst.max(worst_lambda),
        bound: 1e-4,
        passed: worst < 1e-4 && worst_lambda < 1e-4,
        trials: points,
        seed,
        details: json!({
            "max_relative_error": worst,
            "max_relative_error_lambda": worst_lambda,
        }),
    })
}

/// Classification-head gradient against central differences.
pub fn head_gradient_check(points: usize, seed: u64) -> Result<AuditReport> {
    let mut rng = stream_rng(seed, "gradcheck-head");
    let mut worst = 0.0_f64;
    for _ in 0..points {
        let (rows, d, hidden, m) = (12, 5, 8, 4);
        let mlp = Mlp::new(d, hidden, m, &mut rng);
        let x = Matrix::from_vec(rows, d, (0..rows * d).map(|_| rng.random_range(-2.0..2.0)).collect());
        let y: Vec<usize> = (0..rows).map(|_| rng.random_range(0..m)).collect();
        let (_, grads) = head_loss_and_grad(&mlp, &x, &y);
        let mut analytic = Vec::new();
        for s in grads.slices() {
            analytic.extend_from_slice(s);
        }
        let h = 1e-6;
        let mut numeric = Vec::with_capacity(analytic.len());
        let mut probe = mlp.clone();
        let base: Vec<Vec<f64>> = mlp.clone().params_mut().iter().map(|s| s.to_vec()).collect();
        for (slot, values) in base.iter().enumerate() {
            for i in 0..values.len() {
                probe.params_mut()[slot][i] = values[i] + h;
                let up = head_loss_and_grad(&probe, &x, &y).0;
                probe.params_mut()[slot][i] = values[i] - h;
                let down = head_loss_and_grad(&probe, &x, &y).0;
                probe.params_mut()[slot][i] = values[i];
                numeric.push((up - down) / (2.0 * h));
            }
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Ok(AuditReport {
        claim: "classification-head analytic gradients match central differences".into(),
        estimate: worst,
        bound: 1e-4,
        passed: worst < 1e-4,
        trials: points,
        seed,
        details: json!({ "max_relative_error": worst }),
    })
}

/// Everything the `audit` command runs, at the given scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    pub sensitivity_graphs: usize,
    pub budget_graphs: usize,
    pub mc_trials: usize,
    pub laplace_trials: usize,
    pub degree_trials: usize,
    pub rr_trials: usize,
    pub gradient_points: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            sensitivity_graphs: 500,
            budget_graphs: 1000,
            mc_trials: 1_000_000,
            laplace_trials: 100_000,
            degree_trials: 10_000,
            rr_trials: 1_000_000,
            gradient_points: 100,
            seed: 0,
        }
    }
}

pub fn run_all(cfg: &AuditConfig) -> Result<Vec<AuditReport>> {
    let mut out = vec![
        brute_force_sensitivity(8, 1, cfg.sensitivity_graphs, cfg.seed)?,
        budget_bound_sweep(cfg.budget_graphs, 50, BetaRule::OwnDegreeCap, cfg.seed)?,
    ];
    let (pair, plan) = star_pair_fixture(1.0)?;
    out.push(mc_privacy_ratio(&pair, &plan, 40, cfg.mc_trials, cfg.seed)?);
    out.extend(unbiasedness_suite(cfg.laplace_trials, cfg.degree_trials, cfg.seed)?);
    for (m, eps) in [(2, 0.0), (7, 1.0), (10, 4.0)] {
        out.push(rr_frequencies(m, eps, cfg.rr_trials, cfg.seed)?);
    }
    out.push(tnie_gradient_check(cfg.gradient_points, cfg.seed)?);
    out.push(head_gradient_check(cfg.gradient_points, cfg.seed)?);
    Ok(out)
}
