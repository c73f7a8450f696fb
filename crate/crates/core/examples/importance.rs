//! Train the importance estimator on PageRank revealed for half the nodes
//! and compare its ranking of the rest against plain degree.

use importance_dp_gnn::graph::{generate_power_law, PowerLawParams};
use importance_dp_gnn::tnie::{min_max_normalize, pagerank, spearman, train_tnie, TnieConfig};

fn main() -> importance_dp_gnn::Result<()> {
    let g = generate_power_law(&PowerLawParams::new(600, 3, 50, 4, 0.8), 3)?.normalized()?;
    let truth = min_max_normalize(&pagerank(&g.adjacency, 0.85));
    let (known, held_out): (Vec<usize>, Vec<usize>) = (0..g.n()).partition(|u| u % 2 == 0);
    let targets: Vec<(usize, f64)> = known.iter().map(|&u| (u, truth[u])).collect();

    let (model, trace) = train_tnie(&g, &targets, &TnieConfig::default(), 11)?;
    println!(
        "loss {:.5} -> {:.5} over {} epochs",
        trace.losses[0],
        trace.losses.last().unwrap(),
        trace.losses.len()
    );

    let scores = model.predict(&g)?;
    let pick = |v: &[f64]| held_out.iter().map(|&u| v[u]).collect::<Vec<_>>();
    let degree: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
    println!(
        "held-out spearman: estimator {:.4}, degree {:.4}",
        spearman(&pick(&scores), &pick(&truth)),
        spearman(&pick(&degree), &pick(&truth))
    );
    println!("lambda={:.4} phi={:.4}", model.lambda, model.phi);
    Ok(())
}
