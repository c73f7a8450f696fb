//! Full private pipeline against the feature-only baseline on a small
//! synthetic graph, plus a short sweep over the number of hops.

use importance_dp_gnn::experiment::{run_experiment, sweep, sweep_medians, DatasetSource, ExperimentConfig, RunMode, SweepAxis};
use importance_dp_gnn::graph::PowerLawParams;

fn main() -> importance_dp_gnn::Result<()> {
    let base = ExperimentConfig {
        dataset: DatasetSource::Synthetic {
            params: PowerLawParams::new(400, 3, 30, 4, 0.8),
            seed: 2,
        },
        seeds: vec![1, 2],
        ..ExperimentConfig::default()
    };
    for (name, cfg) in [
        ("full", base.clone()),
        ("feature-only", ExperimentConfig { mode: RunMode::Mlp, ..base.clone() }),
        ("non-private", ExperimentConfig { noise_off: true, ..base.clone() }),
    ] {
        let r = run_experiment(&cfg)?;
        println!(
            "{name:>12}: accuracy {:.3} [{:.3}, {:.3}]  eps A/B/C = {}/{}/{}",
            r.accuracy, r.ci95.0, r.ci95.1, r.eps_a, r.eps_b, r.eps_c
        );
    }
    let rows = sweep(&base, SweepAxis::Hops, &[1.0, 2.0, 4.0])?;
    for (k, acc) in sweep_medians(&rows) {
        println!("hops {k}: median accuracy {acc:.3}");
    }
    Ok(())
}
