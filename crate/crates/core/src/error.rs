use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing dataset file: {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("node id {id} out of range (n = {n})")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative feature value {value} at node {node}, column {col}")]
    NegativeFeature { node: usize, col: usize, value: f64 },

    #[error("features are not row-normalized: node {node} has L1 norm {norm}")]
    NotNormalized { node: usize, norm: f64 },

    #[error("node {node} has degree {degree} > D_max = {d_max}")]
    DegreeBound {
        node: usize,
        degree: usize,
        d_max: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node {u} is not adjacent to node {k}")]
    NotAdjacent { u: usize, k: usize },

    #[error("class {class} has {count} nodes, fewer than the {splits} requested splits")]
    ClassTooSmall {
        class: usize,
        count: usize,
        splits: usize,
    },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("audit: {0}")]
    Audit(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

/// Attach a pipeline stage tag to an error.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
