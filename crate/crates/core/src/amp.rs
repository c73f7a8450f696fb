//! Adaptive residual multi-hop aggregation.
//!
//! Starting from `H⁰ = H̄⁰`, each hop computes
//!
//! ```text
//! M = Ã·H^{k-1}
//! γ_u = max(1 − τ / ‖M_u − H̄⁰_u‖₂, 0)
//! H_u^k = (1 − γ_u)·H̄⁰_u + γ_u·M_u
//! ```
//!
//! The anchor is always the noised aggregation `H̄⁰`, never the previous
//! layer. Only already-privatized inputs are read here.

use serde::{Deserialize, Serialize};

use crate::matrix::{l2_norm, Matrix, SparseMatrix};

/// Deviation norms below this give `γ = 0`.
pub const DEVIATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpOutput {
    pub embedding: Matrix,
    /// Mean residual weight `γ` at each hop.
    pub mean_gamma: Vec<f64>,
}

/// Residual weight for one node.
#[inline]
pub fn residual_weight(aggregated: &[f64], anchor: &[f64], tau: f64) -> f64 {
    let dev: f64 = aggregated
        .iter()
        .zip(anchor)
        .map(|(m, h)| (m - h) * (m - h))
        .sum::<f64>()
        .sqrt();
    if dev < DEVIATION_EPS {
        0.0
    } else {
        (1.0 - tau / dev).max(0.0)
    }
}

pub fn amp_propagate(h0: &Matrix, a_tilde: &SparseMatrix, hops: usize, tau: f64) -> AmpOutput {
    assert_eq!(a_tilde.n(), h0.rows(), "propagation matrix does not match embedding rows");
    let mut h = h0.clone();
    let mut mean_gamma = Vec::with_capacity(hops);
    for _ in 0..hops {
        let m = a_tilde.mul_dense(&h);
        let mut next = Matrix::zeros(h0.rows(), h0.cols());
        let mut gamma_sum = 0.0;
        for u in 0..h0.rows() {
            let anchor = h0.row(u);
            let agg = m.row(u);
            let gamma = residual_weight(agg, anchor, tau);
            gamma_sum += gamma;
            for ((o, a), x) in next.row_mut(u).iter_mut().zip(anchor).zip(agg) {
                *o = (1.0 - gamma) * a + gamma * x;
            }
        }
        mean_gamma.push(if h0.rows() == 0 {
            0.0
        } else {
            gamma_sum / h0.rows() as f64
        });
        h = next;
    }
    AmpOutput {
        embedding: h,
        mean_gamma,
    }
}

/// Largest row-wise L∞ norm; handy for the convex-combination bound.
pub fn row_linf(m: &Matrix, u: usize) -> f64 {
    m.row(u).iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// L2 norm of row `u`.
pub fn row_l2(m: &Matrix, u: usize) -> f64 {
    l2_norm(m.row(u))
}
