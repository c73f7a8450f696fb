//! CSV dataset layout.
//!
//! ```text
//! edges.csv       src,dst
//! features.csv    node_id,f0,...,f{d-1}
//! labels.csv      node_id,label            (unlabeled nodes may be omitted)
//! importance.csv  node_id,score            (optional)
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use log::warn;

use super::{Adjacency, Graph};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn open(path: &Path) -> Result<csv::Reader<File>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_id(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<usize> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse::<usize>().map_err(|_| Error::Parse {
        file: file_name(path),
        line: rec.position().map_or(0, |p| p.line() as usize),
        msg: format!("expected a non-negative integer node id, got `{raw}`"),
    })
}

fn parse_f64(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<f64> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse::<f64>().map_err(|_| Error::Parse {
        file: file_name(path),
        line: rec.position().map_or(0, |p| p.line() as usize),
        msg: format!("expected a number in column {i}, got `{raw}`"),
    })
}

/// Load `edges.csv`, `features.csv` and `labels.csv` from `dir`.
///
/// The node count is the number of feature rows; their ids must be exactly
/// `0..n`. Duplicate edges are merged with a warning. Features are returned
/// as stored (not normalized).
pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();

    let fpath = dir.join("features.csv");
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for rec in open(&fpath)?.records() {
        let rec = rec?;
        let id = parse_id(&rec, 0, &fpath)?;
        let vals = (1..rec.len())
            .map(|i| parse_f64(&rec, i, &fpath))
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, vals));
    }
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.1.len());
    let mut features = Matrix::zeros(n, d);
    let mut seen = vec![false; n];
    for (id, vals) in rows {
        if id >= n {
            return Err(Error::NodeOutOfRange { id, n });
        }
        if vals.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: vals.len(),
            });
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::invalid(format!("node {id} listed twice in features.csv")));
        }
        features.row_mut(id).copy_from_slice(&vals);
    }

    let epath = dir.join("edges.csv");
    let mut edges = Vec::new();
    let mut dedupe = HashSet::new();
    for rec in open(&epath)?.records() {
        let rec = rec?;
        let (u, v) = (parse_id(&rec, 0, &epath)?, parse_id(&rec, 1, &epath)?);
        for id in [u, v] {
            if id >= n {
                return Err(Error::NodeOutOfRange { id, n });
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if !dedupe.insert((u.min(v), u.max(v))) {
            warn!("duplicate edge ({u}, {v}) in edges.csv ignored");
            continue;
        }
        edges.push((u, v));
    }
    let adjacency = Adjacency::from_edges(n, edges)?;

    let lpath = dir.join("labels.csv");
    let mut labels = vec![None; n];
    for rec in open(&lpath)?.records() {
        let rec = rec?;
        let id = parse_id(&rec, 0, &lpath)?;
        if id >= n {
            return Err(Error::NodeOutOfRange { id, n });
        }
        labels[id] = Some(parse_id(&rec, 1, &lpath)?);
    }
    let num_classes = labels.iter().flatten().max().map_or(0, |m| m + 1);
    Graph::new(adjacency, features, labels, num_classes)
}

/// Read `importance.csv`: `(node, score)` pairs with scores in `[0, 1]`.
pub fn load_importance(path: impl AsRef<Path>, n: usize) -> Result<Vec<(usize, f64)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for rec in open(path)?.records() {
        let rec = rec?;
        let id = parse_id(&rec, 0, path)?;
        if id >= n {
            return Err(Error::NodeOutOfRange { id, n });
        }
        let score = parse_f64(&rec, 1, path)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!(
                "importance of node {id} is {score}, outside [0, 1]"
            )));
        }
        out.push((id, score));
    }
    Ok(out)
}

/// Write a graph in the layout read by [`load_graph`].
pub fn write_dataset(dir: impl AsRef<Path>, g: &Graph) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("edges.csv"))?;
    w.write_record(["src", "dst"])?;
    for (u, v) in g.adjacency.edges() {
        w.write_record([u.to_string(), v.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("features.csv"))?;
    let mut header = vec!["node_id".to_string()];
    header.extend((0..g.feature_dim()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for u in 0..g.n() {
        let mut rec = vec![u.to_string()];
        rec.extend(g.features.row(u).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("labels.csv"))?;
    w.write_record(["node_id", "label"])?;
    for (u, l) in g.labels.iter().enumerate() {
        if let Some(l) = l {
            w.write_record([u.to_string(), l.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
