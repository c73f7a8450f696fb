//! End-to-end experiment runner and parameter sweeps.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amp::amp_propagate;
use crate::budget::{allocate, equal_weights, weight_coefficients, write_budget, BetaRule, BudgetPlan};
use crate::classifier::{bootstrap_mean_ci, evaluate, train_head, TrainConfig};
use crate::error::{Error, Result, StageContext};
use crate::graph::{
    bound_degree, generate_power_law, load_graph, load_importance, split_nodes, sym_norm_adj,
    Graph, PowerLawParams,
};
use crate::matrix::Matrix;
use crate::perturb::{
    clean_labels, degree_preserving_sample, edge_randomize, laplace, laplace_aggregate,
    randomized_response, sum_aggregate,
};
use crate::rng::{derive_seed, stream_rng};
use crate::tnie::{self, write_importance, ImportanceState, TnieConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Path(PathBuf),
    Synthetic { params: PowerLawParams, seed: u64 },
}

/// How `eps_total` is divided between features, edges and labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSplit {
    Even,
    TwoOneOne,
    /// Relative weights, normalized to `eps_total`.
    Custom([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMode {
    /// Estimator trained on PageRank revealed for the training nodes.
    Tnie,
    /// Node degree used directly as the score.
    Degree,
    /// Estimator trained on the scores listed in a CSV file.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    Adaptive,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Full,
    /// Head on Laplace-noised features only, no graph.
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub eps_total: f64,
    pub split: BudgetSplit,
    /// train / validation / test fractions
    pub node_split: [f64; 3],
    pub d_max: usize,
    pub hops: usize,
    pub tau: f64,
    pub importance: ImportanceMode,
    pub budget_mode: BudgetMode,
    pub edge_sample: bool,
    /// Skip every perturbation (non-private reference).
    pub noise_off: bool,
    pub mode: RunMode,
    pub tnie: TnieConfig,
    pub head: TrainConfig,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic {
                params: default_synthetic(),
                seed: 0,
            },
            eps_total: 12.0,
            split: BudgetSplit::TwoOneOne,
            node_split: [0.5, 0.25, 0.25],
            d_max: 4,
            hops: 2,
            tau: 0.5,
            importance: ImportanceMode::Tnie,
            budget_mode: BudgetMode::Adaptive,
            edge_sample: true,
            noise_off: false,
            mode: RunMode::Full,
            tnie: TnieConfig::default(),
            head: TrainConfig::default(),
            seeds: vec![0],
        }
    }
}

/// Synthetic power-law benchmark graph: n = 1000, attach = 3, d = 5,
/// M = 5, homophily 0.8.
pub fn default_synthetic() -> PowerLawParams {
    PowerLawParams::new(1000, 3, 5, 5, 0.8)
}

/// `(ε_A, ε_B, ε_C)`; the three always add up to `eps_total`.
pub fn split_budget(eps_total: f64, split: BudgetSplit) -> Result<(f64, f64, f64)> {
    if !(eps_total > 0.0) || !eps_total.is_finite() {
        return Err(Error::invalid("eps_total must be positive and finite"));
    }
    let w = match split {
        BudgetSplit::Even => [1.0, 1.0, 1.0],
        BudgetSplit::TwoOneOne => [2.0, 1.0, 1.0],
        BudgetSplit::Custom(w) => w,
    };
    if w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::invalid("budget split weights must be positive"));
    }
    let s: f64 = w.iter().sum();
    let a = eps_total * w[0] / s;
    let b = eps_total * w[1] / s;
    let c = eps_total - a - b;
    if !(c > 0.0) || a + b + c != eps_total {
        return Err(Error::invalid("budget split does not add up to eps_total"));
    }
    Ok((a, b, c))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        split_budget(self.eps_total, self.split)?;
        if self.d_max == 0 {
            return Err(Error::invalid("d_max must be at least 1"));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::invalid("tau must be non-negative"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.node_split.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::invalid("split fractions must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn load_dataset(&self) -> Result<Graph> {
        match &self.dataset {
            DatasetSource::Path(p) => load_graph(p),
            DatasetSource::Synthetic { params, seed } => generate_power_law(params, *seed),
        }
        .stage("dataset")
    }
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub accuracy: f64,
    pub ci95: (f64, f64),
    pub n_test: usize,
    pub per_epoch_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    /// Mean residual weight per propagation hop.
    pub mean_gamma: Vec<f64>,
}

/// Intermediate products of one run, for inspection.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub importance: Option<ImportanceState>,
    pub plan: Option<BudgetPlan>,
    pub embedding: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Mean over seeds.
    pub accuracy: f64,
    pub median_accuracy: f64,
    /// The run's own interval for one seed, otherwise a bootstrap interval
    /// over the per-seed accuracies.
    pub ci95: (f64, f64),
    pub seeds: Vec<u64>,
    pub config_hash: String,
    /// Training loss of the first seed.
    pub per_epoch_loss: Vec<f64>,
    pub eps_total: f64,
    #[serde(rename = "eps_A")]
    pub eps_a: f64,
    #[serde(rename = "eps_B")]
    pub eps_b: f64,
    #[serde(rename = "eps_C")]
    pub eps_c: f64,
    pub eps_sum: f64,
    pub runs: Vec<RunRecord>,
}

/// Preprocessed graph shared by every stage of one run.
fn prepare(raw: &Graph, cfg: &ExperimentConfig, seed: u64) -> Result<Graph> {
    let g = raw.normalized().stage("normalize")?;
    bound_degree(&g, cfg.d_max, seed).stage("degree-bound")
}

fn importance_state(
    g: &Graph,
    cfg: &ExperimentConfig,
    train: &[usize],
    seed: u64,
) -> Result<ImportanceState> {
    let scores = match &cfg.importance {
        ImportanceMode::Degree => g.degrees().iter().map(|&d| d as f64).collect(),
        mode => {
            let known: Vec<(usize, f64)> = match mode {
                ImportanceMode::File(p) => load_importance(p, g.n())?,
                _ => {
                    let truth = tnie::min_max_normalize(&tnie::pagerank(&g.adjacency, 0.85));
                    train.iter().map(|&u| (u, truth[u])).collect()
                }
            };
            let (model, _) = tnie::train_tnie(g, &known, &cfg.tnie, derive_seed(seed, "tnie-init"))?;
            let mut scores = model.predict(g)?;
            for &(u, t) in &known {
                scores[u] = t;
            }
            scores
        }
    };
    tnie::rank_importance(&scores)
}

/// One seed of the configured pipeline.
pub fn run_once(raw: &Graph, cfg: &ExperimentConfig, seed: u64) -> Result<(RunRecord, RunArtifacts)> {
    cfg.validate()?;
    let (eps_a, eps_b, eps_c) = split_budget(cfg.eps_total, cfg.split)?;
    let g = prepare(raw, cfg, seed)?;
    let splits = split_nodes(&g, cfg.node_split, derive_seed(seed, "split")).stage("split")?;

    let mut known_labels = vec![None; g.n()];
    for u in splits.known() {
        known_labels[u] = g.labels[u];
    }
    let labels = if cfg.noise_off {
        clean_labels(&known_labels, g.num_classes)
    } else {
        randomized_response(&known_labels, eps_c, g.num_classes, derive_seed(seed, "rr")).stage("label-perturb")?
    };

    let (hk, mean_gamma, importance, plan) = match cfg.mode {
        RunMode::Mlp => {
            // a feature row moves by at most 2 in L1 between neighbors
            let mut x = g.features.clone();
            if !cfg.noise_off {
                let b = 2.0 / (eps_a + eps_b);
                let mut rng = stream_rng(seed, "laplace");
                x.as_mut_slice().iter_mut().for_each(|v| *v += laplace(&mut rng, b));
            }
            (x, Vec::new(), None, None)
        }
        RunMode::Full => {
            let state = importance_state(&g, cfg, &splits.train, seed).stage("importance")?;
            let beta = match cfg.budget_mode {
                BudgetMode::Adaptive => {
                    weight_coefficients(&g.adjacency, &state.ranks, cfg.d_max, BetaRule::OwnDegreeCap)
                        .stage("budget")?
                }
                BudgetMode::Equal => equal_weights(g.n()),
            };
            let plan = allocate(eps_a, beta, cfg.d_max).stage("budget")?;
            let h0 = if cfg.noise_off {
                sum_aggregate(&g.adjacency, &g.features)
            } else {
                laplace_aggregate(&g, &plan, derive_seed(seed, "laplace")).stage("laplace")?.h0
            };
            let adjacency = if cfg.noise_off {
                g.adjacency.clone()
            } else {
                let noisy = edge_randomize(&g.adjacency, eps_b, derive_seed(seed, "edge")).stage("edge-perturb")?;
                if cfg.edge_sample {
                    degree_preserving_sample(&noisy, &g.degrees(), derive_seed(seed, "edge-sample"))
                        .stage("edge-sample")?
                        .adjacency
                } else {
                    noisy.adjacency
                }
            };
            let a_tilde = sym_norm_adj(&adjacency);
            let out = amp_propagate(&h0, &a_tilde, cfg.hops, cfg.tau);
            (out.embedding, out.mean_gamma, Some(state), Some(plan))
        }
    };

    let (model, trace) = train_head(&hk, &labels, &splits, &cfg.head, derive_seed(seed, "head")).stage("train")?;
    let metrics = evaluate(&model, &hk, &g.labels, &splits.test, derive_seed(seed, "bootstrap")).stage("evaluate")?;
    log::info!("seed {seed}: accuracy {:.4}", metrics.accuracy);
    Ok((
        RunRecord {
            seed,
            accuracy: metrics.accuracy,
            ci95: metrics.ci95,
            n_test: metrics.n_test,
            per_epoch_loss: trace.train_loss,
            val_loss: trace.val_loss,
            best_epoch: trace.best_epoch,
            mean_gamma,
        },
        RunArtifacts {
            importance,
            plan,
            embedding: hk,
        },
    ))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarize(cfg: &ExperimentConfig, runs: Vec<RunRecord>) -> Result<ExperimentResult> {
    let (eps_a, eps_b, eps_c) = split_budget(cfg.eps_total, cfg.split)?;
    let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let ci95 = if runs.len() == 1 {
        runs[0].ci95
    } else {
        bootstrap_mean_ci(&accs, crate::classifier::BOOTSTRAP_RESAMPLES, derive_seed(cfg.seeds[0], "seed-bootstrap"))
    };
    Ok(ExperimentResult {
        accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        median_accuracy: median(&accs),
        ci95,
        seeds: cfg.seeds.clone(),
        config_hash: cfg.hash(),
        per_epoch_loss: runs[0].per_epoch_loss.clone(),
        eps_total: cfg.eps_total,
        eps_a,
        eps_b,
        eps_c,
        eps_sum: eps_a + eps_b + eps_c,
        runs,
    })
}

/// Every seed of `cfg` on one loaded dataset.
pub fn run_on_graph(raw: &Graph, cfg: &ExperimentConfig) -> Result<(ExperimentResult, Vec<RunArtifacts>)> {
    cfg.validate()?;
    let mut runs = Vec::new();
    let mut artifacts = Vec::new();
    for &seed in &cfg.seeds {
        let (r, a) = run_once(raw, cfg, seed)?;
        runs.push(r);
        artifacts.push(a);
    }
    Ok((summarize(cfg, runs)?, artifacts))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let raw = cfg.load_dataset()?;
    Ok(run_on_graph(&raw, cfg)?.0)
}

/// Write `metrics.json` and, if asked, `importance_out.csv` and
/// `budget_out.csv` of the first seed.
pub fn write_outputs(
    dir: impl AsRef<Path>,
    result: &ExperimentResult,
    artifacts: &[RunArtifacts],
    intermediates: bool,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join("metrics.json"))?;
    serde_json::to_writer_pretty(f, result)?;
    if intermediates {
        if let Some(a) = artifacts.first() {
            if let Some(s) = &a.importance {
                write_importance(dir.join("importance_out.csv"), s)?;
            }
            if let Some(p) = &a.plan {
                write_budget(dir.join("budget_out.csv"), p)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Epsilon,
    Dmax,
    Hops,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn with_axis(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::invalid(format!("{axis:?} value {v} is not a whole number")))
        }
    };
    match axis {
        SweepAxis::Epsilon => c.eps_total = value,
        SweepAxis::Dmax => c.d_max = as_count(value)?,
        SweepAxis::Hops => c.hops = as_count(value)?,
    }
    Ok(c)
}

/// One run per value per seed.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    let raw = cfg.load_dataset()?;
    let mut rows = Vec::new();
    for &v in values {
        let c = with_axis(cfg, axis, v)?;
        let (res, _) = run_on_graph(&raw, &c)?;
        rows.extend(res.runs.iter().map(|r| SweepRow {
            axis_value: v,
            seed: r.seed,
            accuracy: r.accuracy,
            ci_lo: r.ci95.0,
            ci_hi: r.ci95.1,
        }));
    }
    Ok(rows)
}

pub fn write_sweep(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Median accuracy per axis value, in the order values first appear.
pub fn sweep_medians(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.contains(&r.axis_value) {
            values.push(r.axis_value);
        }
    }
    values
        .into_iter()
        .map(|v| {
            let accs: Vec<f64> = rows.iter().filter(|r| r.axis_value == v).map(|r| r.accuracy).collect();
            (v, median(&accs))
        })
        .collect()
}

/// Random seeds for quick experiments.
pub fn seeds_from(master: u64, count: usize) -> Vec<u64> {
    let mut rng = stream_rng(master, "seeds");
    (0..count).map(|_| rng.random()).collect()
}
