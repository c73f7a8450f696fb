//! The three perturbations: noised first aggregation, edge randomization
//! with degree-preserving sampling, and randomized response on labels.

use importance_dp_gnn::budget::{allocate, equal_weights};
use importance_dp_gnn::graph::{bound_degree, generate_power_law, PowerLawParams};
use importance_dp_gnn::perturb::{
    degree_preserving_sample, edge_randomize, expected_sampled_degree, laplace_aggregate,
    randomized_response, sum_aggregate,
};

fn main() -> importance_dp_gnn::Result<()> {
    let g = generate_power_law(&PowerLawParams::new(300, 3, 20, 4, 0.8), 5)?.normalized()?;
    let g = bound_degree(&g, 8, 5)?;

    let plan = allocate(4.0, equal_weights(g.n()), 8)?;
    let exact = sum_aggregate(&g.adjacency, &g.features);
    let noisy = laplace_aggregate(&g, &plan, 1)?.h0;
    println!(
        "laplace scale {:.3}, max |noise| {:.3}",
        plan.sensitivity / plan.eps_u[0],
        noisy.max_abs_diff(&exact)
    );

    for eps_b in [1.0, 3.0, 6.0] {
        let randomized = edge_randomize(&g.adjacency, eps_b, 2)?;
        let sampled = degree_preserving_sample(&randomized, &g.degrees(), 3)?;
        let kept = g.adjacency.edges().filter(|&(u, v)| sampled.adjacency.has_edge(u, v)).count();
        let expected: f64 = expected_sampled_degree(&g.adjacency, randomized.keep_prob, true).iter().sum();
        println!(
            "eps_B={eps_b}: {} edges after randomization, {} after sampling (expected {:.0}), {kept} of {} true edges kept",
            randomized.adjacency.num_edges(),
            sampled.adjacency.num_edges(),
            expected / 2.0,
            g.adjacency.num_edges()
        );
    }

    let labels = randomized_response(&g.labels, 2.0, g.num_classes, 4)?;
    let unchanged = g.labels.iter().zip(labels.labels()).filter(|(a, b)| a == b).count();
    println!("randomized response at eps_C=2 kept {unchanged}/{} labels", g.n());
    Ok(())
}
