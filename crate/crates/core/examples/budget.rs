//! Per-node weight coefficients and Laplace budgets on a small star and on a
//! bounded power-law graph.

use importance_dp_gnn::budget::{allocate, bound_lhs, weight_coefficients, BetaRule};
use importance_dp_gnn::graph::{bound_degree, generate_power_law, Adjacency, PowerLawParams};
use importance_dp_gnn::tnie::rank_importance;

fn main() -> importance_dp_gnn::Result<()> {
    // center 0 with three leaves, D_max = 5 leaves room to reuse
    let star = Adjacency::from_edges(4, [(0, 1), (0, 2), (0, 3)])?;
    let ranks = [4, 1, 2, 3];
    let beta = weight_coefficients(&star, &ranks, 5, BetaRule::OwnDegreeCap)?;
    let plan = allocate(1.0, beta, 5)?;
    for u in 0..4 {
        println!("node {u}: beta={:.4} eps_u={:.4}", plan.beta[u], plan.eps_u[u]);
    }
    println!("bound terms {:?} (cap {})", bound_lhs(&star, &plan.beta), 2 * plan.d_max);

    let g = generate_power_law(&PowerLawParams::new(500, 3, 10, 3, 0.5), 1)?;
    let g = bound_degree(&g, 8, 1)?;
    let degrees: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
    let state = rank_importance(&degrees)?;
    let beta = weight_coefficients(&g.adjacency, &state.ranks, 8, BetaRule::OwnDegreeCap)?;
    let worst = bound_lhs(&g.adjacency, &beta).into_iter().fold(0.0, f64::max);
    let mean = beta.iter().sum::<f64>() / beta.len() as f64;
    println!("power-law graph: mean beta {mean:.3}, worst bound term {worst:.3} <= 16");
    Ok(())
}
