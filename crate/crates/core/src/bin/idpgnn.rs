#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use importance_dp_gnn::audit::{self, AuditConfig};
use importance_dp_gnn::experiment::{
    self, BudgetMode, BudgetSplit, DatasetSource, ExperimentConfig, ImportanceMode, RunMode,
    SweepAxis,
};
use importance_dp_gnn::graph::{generate_power_law, write_dataset, PowerLawParams};

#[derive(Parser)]
#[command(name = "idpgnn", version, about = "Importance-grained adaptive DP for graph learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once per seed and write metrics.json
    Run(RunArgs),
    /// Repeat runs along one parameter axis and write results.csv
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run the empirical privacy / unbiasedness checks
    Audit {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// scale every trial count by this factor
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a synthetic power-law dataset in the CSV layout
    Gen {
        #[arg(long, value_parser = parse_synthetic, default_value = "1000,3,5,5,0.8")]
        synthetic: PowerLawParams,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Epsilon,
    Dmax,
    Hops,
}

#[derive(Clone, Copy, ValueEnum)]
enum Importance {
    Tnie,
    Degree,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum Budget {
    Adaptive,
    Equal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Mlp,
}

#[derive(Args)]
struct RunArgs {
    /// directory with features.csv, edges.csv, labels.csv
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// n,attach,d,M,homophily
    #[arg(long, value_parser = parse_synthetic)]
    synthetic: Option<PowerLawParams>,
    /// seed for the synthetic generator
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// synthetic generator: words drawn per node
    #[arg(long)]
    words_per_node: Option<usize>,
    /// synthetic generator: chance a word comes from the node's class block
    #[arg(long)]
    class_word_prob: Option<f64>,
    #[arg(long, default_value_t = 12.0)]
    eps_total: f64,
    /// even, 2-1-1 or three weights a,b,c
    #[arg(long, default_value = "2-1-1", value_parser = parse_split)]
    split: BudgetSplit,
    #[arg(long)]
    dmax: Option<usize>,
    #[arg(long)]
    tnie_depth: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value = "tnie")]
    importance: Importance,
    /// importance.csv for --importance file
    #[arg(long)]
    importance_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "adaptive")]
    budget_mode: Budget,
    #[arg(long)]
    no_edge_sample: bool,
    #[arg(long)]
    noise_off: bool,
    #[arg(long, value_enum, default_value = "full")]
    mode: Mode,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// comma-separated list
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// also write importance_out.csv and budget_out.csv
    #[arg(long)]
    emit_intermediates: bool,
}

fn parse_synthetic(s: &str) -> Result<PowerLawParams, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err("expected n,attach,d,M,homophily".into());
    }
    let int = |i: usize| parts[i].parse::<usize>().map_err(|e| format!("{}: {e}", parts[i]));
    let h = parts[4].parse::<f64>().map_err(|e| format!("{}: {e}", parts[4]))?;
    Ok(PowerLawParams::new(int(0)?, int(1)?, int(2)?, int(3)?, h))
}

fn parse_split(s: &str) -> Result<BudgetSplit, String> {
    match s {
        "even" => Ok(BudgetSplit::Even),
        "2-1-1" => Ok(BudgetSplit::TwoOneOne),
        _ => {
            let w: Vec<f64> = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad split {s}: {e}"))?;
            <[f64; 3]>::try_from(w)
                .map(BudgetSplit::Custom)
                .map_err(|_| "custom split needs three weights".to_string())
        }
    }
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset = match (&self.dataset, &self.synthetic) {
            (Some(p), _) => DatasetSource::Path(p.clone()),
            (None, Some(params)) => DatasetSource::Synthetic {
                params: params.clone(),
                seed: self.data_seed,
            },
            (None, None) => DatasetSource::Synthetic {
                params: experiment::default_synthetic(),
                seed: self.data_seed,
            },
        };
        if let DatasetSource::Synthetic { params, .. } = &mut cfg.dataset {
            if let Some(w) = self.words_per_node {
                params.words_per_node = w;
            }
            if let Some(p) = self.class_word_prob {
                params.class_word_prob = p;
            }
        }
        cfg.eps_total = self.eps_total;
        cfg.split = self.split;
        if let Some(d) = self.dmax {
            cfg.d_max = d;
        }
        if let Some(t) = self.tnie_depth {
            cfg.tnie.depth = t;
        }
        if let Some(k) = self.hops {
            cfg.hops = k;
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        cfg.importance = match self.importance {
            Importance::Tnie => ImportanceMode::Tnie,
            Importance::Degree => ImportanceMode::Degree,
            Importance::File => match &self.importance_file {
                Some(p) => ImportanceMode::File(p.clone()),
                None => bail!("--importance file needs --importance-file"),
            },
        };
        cfg.budget_mode = match self.budget_mode {
            Budget::Adaptive => BudgetMode::Adaptive,
            Budget::Equal => BudgetMode::Equal,
        };
        cfg.edge_sample = !self.no_edge_sample;
        cfg.noise_off = self.noise_off;
        cfg.mode = match self.mode {
            Mode::Full => RunMode::Full,
            Mode::Mlp => RunMode::Mlp,
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        } else if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let raw = cfg.load_dataset()?;
            let (result, artifacts) = experiment::run_on_graph(&raw, &cfg)?;
            experiment::write_outputs(&args.out, &result, &artifacts, args.emit_intermediates)?;
            println!(
                "accuracy {:.4} (95% CI {:.4}-{:.4}) over {} seed(s)",
                result.accuracy,
                result.ci95.0,
                result.ci95.1,
                result.seeds.len()
            );
        }
        Command::Sweep { run, axis, values } => {
            let cfg = run.config()?;
            let axis = match axis {
                Axis::Epsilon => SweepAxis::Epsilon,
                Axis::Dmax => SweepAxis::Dmax,
                Axis::Hops => SweepAxis::Hops,
            };
            let rows = experiment::sweep(&cfg, axis, &values)?;
            std::fs::create_dir_all(&run.out)?;
            experiment::write_sweep(run.out.join("results.csv"), &rows)?;
            for (v, m) in experiment::sweep_medians(&rows) {
                println!("{v}\t{m:.4}");
            }
        }
        Command::Audit { seed, scale, out } => {
            if !(scale > 0.0) {
                bail!("--scale must be positive");
            }
            let d = AuditConfig::default();
            let s = |x: usize| ((x as f64 * scale).round() as usize).max(1);
            let cfg = AuditConfig {
                sensitivity_graphs: s(d.sensitivity_graphs),
                budget_graphs: s(d.budget_graphs),
                mc_trials: s(d.mc_trials),
                laplace_trials: s(d.laplace_trials),
                degree_trials: s(d.degree_trials),
                rr_trials: s(d.rr_trials),
                gradient_points: s(d.gradient_points),
                seed,
            };
            let reports = audit::run_all(&cfg)?;
            std::fs::create_dir_all(&out)?;
            audit::write_reports(out.join("audit_report.json"), &reports)?;
            for r in &reports {
                println!(
                    "{} {} (estimate {:.4e}, bound {:.4e})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.claim,
                    r.estimate,
                    r.bound
                );
            }
            if reports.iter().any(|r| !r.passed) {
                std::process::exit(1);
            }
        }
        Command::Gen { synthetic, seed, out } => {
            let g = generate_power_law(&synthetic, seed)?;
            write_dataset(&out, &g).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} nodes, {} edges to {}", g.n(), g.adjacency.num_edges(), out.display());
        }
    }
    Ok(())
}
