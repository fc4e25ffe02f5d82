//! Decision trees, bagged ensembles, and their leaf rules.

mod io;
mod train;
mod tree;

pub use train::{train_bagged_ensemble, train_tree, BaggingConfig};
pub use tree::{Antecedent, DecisionTree, Direction, Node, Rule};

#[cfg(test)]
pub(crate) use tree::tests::depth_two_tree;

use crate::error::{Error, Result};

/// A collection of trees over `n_features` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl TreeEnsemble {
    pub fn new(trees: Vec<DecisionTree>, n_features: usize) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidInput("ensemble has no trees".into()));
        }
        for (t, tree) in trees.iter().enumerate() {
            if let Some(f) = tree.max_feature() {
                if f >= n_features {
                    return Err(Error::InvalidInput(format!(
                        "tree {t} splits on feature {f} but the ensemble has {n_features} features"
                    )));
                }
            }
        }
        Ok(Self { trees, n_features })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Total number of leaves (rules) across all trees.
    pub fn n_leaves(&self) -> usize {
        self.trees.iter().map(DecisionTree::n_leaves).sum()
    }

    /// Start of each tree's columns in the stacked leaf ordering, plus the total.
    pub fn leaf_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.trees.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for tree in &self.trees {
            acc += tree.n_leaves();
            offsets.push(acc);
        }
        offsets
    }

    /// Bagged prediction: the average of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn rule(&self, tree: usize, leaf: usize) -> Result<Rule> {
        self.trees
            .get(tree)
            .ok_or(Error::OutOfRange {
                index: tree,
                len: self.trees.len(),
            })?
            .rule_of_leaf(tree, leaf)
    }
}
