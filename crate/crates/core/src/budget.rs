//! Node-importance-grained budget allocation.
//!
//! Node `k` with degree below `D_max` leaves `D_max − D_k` units of the
//! aggregation sensitivity unused. That slack is shared among `k`'s
//! neighbors in proportion to their importance rank:
//!
//! ```text
//! r(u, k) = R(u) / Σ_{j∈N(k)} R(j)
//! β_u     = min( min_{k∈N(u)} r(u,k)·(D_max − D_k) + 1 ,  D_max / D_u )
//! ε_u     = ε_A · β_u
//! ```
//!
//! With this rule every node `k` satisfies
//! `D_k·β_k + Σ_{i∈N(k)} β_i ≤ 2·D_max`, which is what keeps the whole
//! noised aggregation within `ε_A`. See [`BetaRule`] for the alternative
//! reading of the degree cap.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;

/// Which degree bounds `β_u` from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BetaRule {
    /// `β_u ≤ D_max / D_u`: the node's own degree.
    #[default]
    OwnDegreeCap,
    /// `β_u ≤ min_{k∈N(u)} D_max / D_k`: the cap sits inside the minimum over
    /// neighbors. Kept for comparison only; it does not satisfy the budget
    /// bound (a star `K₁,₃` with `D_max = 3` already breaks it).
    NeighborDegreeCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub eps_a: f64,
    pub beta: Vec<f64>,
    pub eps_u: Vec<f64>,
    pub d_max: usize,
    /// L1 sensitivity of the first sum aggregation, `2·D_max`.
    pub sensitivity: f64,
}

/// Share of `k`'s reusable slack granted to its neighbor `u`.
pub fn reusable_ratio(u: usize, k: usize, ranks: &[usize], adj: &Adjacency) -> Result<f64> {
    if !adj.has_edge(u, k) {
        return Err(Error::NotAdjacent { u, k });
    }
    let total: usize = adj.neighbors(k).iter().map(|&j| ranks[j]).sum();
    Ok(ranks[u] as f64 / total as f64)
}

/// Weight coefficient `β_u` for every node. Isolated nodes get `D_max`.
pub fn weight_coefficients(
    adj: &Adjacency,
    ranks: &[usize],
    d_max: usize,
    rule: BetaRule,
) -> Result<Vec<f64>> {
    if ranks.len() != adj.n() {
        return Err(Error::DimensionMismatch {
            expected: adj.n(),
            got: ranks.len(),
        });
    }
    if d_max == 0 {
        return Err(Error::invalid("D_max must be at least 1"));
    }
    if let Some(u) = (0..adj.n()).find(|&u| adj.degree(u) > d_max) {
        return Err(Error::DegreeBound {
            node: u,
            degree: adj.degree(u),
            d_max,
        });
    }
    let rank_sum: Vec<f64> = (0..adj.n())
        .map(|k| adj.neighbors(k).iter().map(|&j| ranks[j] as f64).sum())
        .collect();
    let dm = d_max as f64;

    let beta = (0..adj.n())
        .map(|u| {
            let neigh = adj.neighbors(u);
            if neigh.is_empty() {
                return dm;
            }
            let mut b = f64::INFINITY;
            for &k in neigh {
                let dk = adj.degree(k) as f64;
                let share = ranks[u] as f64 / rank_sum[k] * (dm - dk) + 1.0;
                b = b.min(share);
                if rule == BetaRule::NeighborDegreeCap {
                    b = b.min(dm / dk);
                }
            }
            if rule == BetaRule::OwnDegreeCap {
                b = b.min(dm / neigh.len() as f64);
            }
            b
        })
        .collect();
    Ok(beta)
}

/// All-ones coefficients: every node gets exactly `ε_A`.
pub fn equal_weights(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

pub fn allocate(eps_a: f64, beta: Vec<f64>, d_max: usize) -> Result<BudgetPlan> {
    if !(eps_a > 0.0) || !eps_a.is_finite() {
        return Err(Error::invalid(format!("eps_A must be positive, got {eps_a}")));
    }
    if d_max == 0 {
        return Err(Error::invalid("D_max must be at least 1"));
    }
    let eps_u = beta.iter().map(|b| eps_a * b).collect();
    Ok(BudgetPlan {
        eps_a,
        beta,
        eps_u,
        d_max,
        sensitivity: 2.0 * d_max as f64,
    })
}

/// `D_k·β_k + Σ_{i∈N(k)} β_i` for every node `k`.
pub fn bound_lhs(adj: &Adjacency, beta: &[f64]) -> Vec<f64> {
    (0..adj.n())
        .map(|k| {
            adj.degree(k) as f64 * beta[k] + adj.neighbors(k).iter().map(|&i| beta[i]).sum::<f64>()
        })
        .collect()
}

/// Write `node_id,beta,epsilon`.
pub fn write_budget(path: impl AsRef<Path>, plan: &BudgetPlan) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["node_id", "beta", "epsilon"])?;
    for (u, (b, e)) in plan.beta.iter().zip(&plan.eps_u).enumerate() {
        w.write_record([u.to_string(), b.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
