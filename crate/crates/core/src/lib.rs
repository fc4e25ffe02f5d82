//! Sparse, fused rule ensembles extracted from bagged decision trees.
//!
//! Each tree leaf becomes a rule; the rule weights are fitted by penalized
//! least squares with an L1 or MCP sparsity penalty and a fusion penalty on
//! adjacent leaves of the same tree. The solver is block coordinate descent
//! over trees with greedy block selection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod ensemble;
mod error;
pub mod extract;
pub mod mapping;
pub mod penalties;
pub mod problem;
pub mod solver;
pub mod synth;

pub use dataset::Dataset;
pub use error::{Error, Result};
