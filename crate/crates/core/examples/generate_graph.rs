//! Generate a synthetic power-law graph, write it in the CSV layout and load
//! it back.

use importance_dp_gnn::graph::{edge_homophily, generate_power_law, load_graph, write_dataset, PowerLawParams};

fn main() -> importance_dp_gnn::Result<()> {
    let params = PowerLawParams::new(1000, 3, 100, 5, 0.8);
    let g = generate_power_law(&params, 7)?;
    let degrees = g.degrees();
    println!(
        "n={} edges={} max degree={} mean degree={:.2} edge homophily={:.3}",
        g.n(),
        g.adjacency.num_edges(),
        g.adjacency.max_degree(),
        degrees.iter().sum::<usize>() as f64 / g.n() as f64,
        edge_homophily(&g)
    );

    let dir = std::env::temp_dir().join("idpgnn-example-graph");
    write_dataset(&dir, &g)?;
    let back = load_graph(&dir)?;
    assert_eq!(back.adjacency, g.adjacency);
    println!("round trip through {} ok", dir.display());
    Ok(())
}
