//! Node-importance-grained adaptive differential privacy for graph neural
//! networks.
//!
//! The pipeline, in order:
//!
//! 1. [`tnie`] estimates node importance from features and topology and
//!    ranks the nodes.
//! 2. [`budget`] turns the ranks into per-node Laplace budgets.
//! 3. [`perturb`] releases the first sum aggregation under those budgets,
//!    randomizes the adjacency and the known labels.
//! 4. [`amp`] propagates the noised aggregation over the noisy adjacency with
//!    an adaptive residual connection.
//! 5. [`classifier`] fits a softmax head on the result.
//!
//! [`experiment`] wires the stages together and [`audit`] checks the privacy
//! and unbiasedness properties empirically.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod audit;
pub mod budget;
pub mod classifier;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod matrix;
pub mod nn;
pub mod perturb;
pub mod rng;
pub mod tnie;

pub use error::{Error, Result};
