//! Rule sets from fitted weights: pruning, interpretability counts, export.

mod export;

pub use export::RuleFormat;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::ensemble::{DecisionTree, Node, Rule, TreeEnsemble};
use crate::error::{Error, Result};
use crate::penalties::PenaltyConfig;

/// Weights at or below this magnitude count as zero.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRule {
    pub rule: Rule,
    pub weight: f64,
}

impl WeightedRule {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.weight * self.rule.evaluate(x)
    }
}

/// `intercept + sum_k weight_k * rule_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedRuleSet {
    pub rules: Vec<WeightedRule>,
    pub intercept: f64,
    /// Penalty the weights were fitted under, when known.
    pub penalty: Option<PenaltyConfig>,
}

impl ExtractedRuleSet {
    pub fn n_rules(&self) -> usize {
        self.rules.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.rules.iter().map(|r| r.evaluate(x)).sum::<f64>()
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        data.rows().map(|x| self.predict(x)).collect()
    }

    /// Canonical leaf positions of the selected rules, grouped by tree.
    pub fn selected_leaves(&self, n_trees: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_trees];
        for r in &self.rules {
            out[r.rule.tree_index].push(r.rule.leaf_index);
        }
        out
    }
}

/// Materializes every rule whose weight exceeds `zero_tolerance` in magnitude.
///
/// `weights` follows the mapping-matrix column order: trees in ensemble order,
/// leaves in canonical order within each tree.
pub fn extract_rules(
    ensemble: &TreeEnsemble,
    weights: &[f64],
    zero_tolerance: f64,
    intercept: f64,
) -> Result<ExtractedRuleSet> {
    if weights.len() != ensemble.n_leaves() {
        return Err(Error::dims(
            "weight vector",
            ensemble.n_leaves(),
            weights.len(),
        ));
    }
    let mut rules = Vec::new();
    let mut col = 0;
    for (t, tree) in ensemble.trees().iter().enumerate() {
        for leaf in 0..tree.n_leaves() {
            let w = weights[col];
            col += 1;
            if w.abs() > zero_tolerance {
                rules.push(WeightedRule {
                    rule: tree.rule_of_leaf(t, leaf)?,
                    weight: w,
                });
            }
        }
    }
    Ok(ExtractedRuleSet {
        rules,
        intercept,
        penalty: None,
    })
}

/// The part of a tree that survives when only some leaves are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedTree {
    pub tree_index: usize,
    /// Canonical leaf positions, ascending.
    pub retained_leaves: Vec<usize>,
    /// Node ids of retained split nodes, in pre-order.
    pub retained_internal: Vec<usize>,
}

impl PrunedTree {
    pub fn n_nodes(&self) -> usize {
        self.retained_leaves.len() + self.retained_internal.len()
    }
}

/// Keeps a split node iff at least one selected leaf lies below it.
pub fn prune_tree(
    tree: &DecisionTree,
    tree_index: usize,
    selected: &[usize],
) -> Result<PrunedTree> {
    let n = tree.n_leaves();
    let mut mark = vec![false; n];
    for &leaf in selected {
        if leaf >= n {
            return Err(Error::OutOfRange {
                index: leaf,
                len: n,
            });
        }
        mark[leaf] = true;
    }
    // prefix[k] = number of selected leaves among positions < k
    let mut prefix = vec![0usize; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] + usize::from(mark[k]);
    }
    let retained_internal = tree
        .preorder()
        .iter()
        .copied()
        .filter(|&id| matches!(tree.nodes()[id], Node::Split { .. }))
        .filter(|&id| {
            let span = tree.leaf_span(id);
            prefix[span.end] > prefix[span.start]
        })
        .collect();
    Ok(PrunedTree {
        tree_index,
        retained_leaves: (0..n).filter(|&k| mark[k]).collect(),
        retained_internal,
    })
}

/// Number of maximal runs of consecutive positions in a sorted, deduplicated list.
pub fn contiguous_runs(sorted_leaves: &[usize]) -> usize {
    sorted_leaves
        .iter()
        .enumerate()
        .filter(|&(i, &k)| i == 0 || sorted_leaves[i - 1] + 1 != k)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub n_rules: usize,
    pub n_trees_used: usize,
    /// Split nodes kept across all pruned trees.
    pub n_internal_nodes: usize,
    pub n_total_nodes: usize,
    /// Distinct antecedents, i.e. distinct retained split nodes.
    pub n_antecedents: usize,
    /// Per tree, the number of maximal runs of selected leaves in canonical order.
    pub contiguous_runs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
}

impl ModelStats {
    /// Runs summed over trees that use at least one rule, divided by their count.
    pub fn runs_per_used_tree(&self) -> f64 {
        if self.n_trees_used == 0 {
            return 0.0;
        }
        self.contiguous_runs.iter().sum::<usize>() as f64 / self.n_trees_used as f64
    }
}

/// Interpretability counts for the rule set, plus test error when `test` is given.
pub fn stats(
    ensemble: &TreeEnsemble,
    rule_set: &ExtractedRuleSet,
    test: Option<&Dataset>,
) -> Result<ModelStats> {
    let mut selected = rule_set.selected_leaves(ensemble.n_trees());
    let mut n_internal = 0;
    let mut runs = Vec::with_capacity(ensemble.n_trees());
    for (t, (tree, leaves)) in ensemble.trees().iter().zip(selected.iter_mut()).enumerate() {
        leaves.sort_unstable();
        leaves.dedup();
        n_internal += prune_tree(tree, t, leaves)?.retained_internal.len();
        runs.push(contiguous_runs(leaves));
    }
    let n_rules: usize = selected.iter().map(Vec::len).sum();
    let (test_mse, r_squared) = match test {
        None => (None, None),
        Some(data) => {
            if data.n_features() != ensemble.n_features() {
                return Err(Error::dims(
                    "test feature count",
                    ensemble.n_features(),
                    data.n_features(),
                ));
            }
            let y = data.target();
            let n = y.len() as f64;
            let mse = data
                .rows()
                .zip(y)
                .map(|(x, t)| (t - rule_set.predict(x)).powi(2))
                .sum::<f64>()
                / n;
            let mean = data.target_mean();
            let var = y.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
            let r2 = if var > 0.0 { 1.0 - mse / var } else { f64::NAN };
            (Some(mse), Some(r2).filter(|v| v.is_finite()))
        }
    };
    Ok(ModelStats {
        n_rules,
        n_trees_used: selected.iter().filter(|l| !l.is_empty()).count(),
        n_internal_nodes: n_internal,
        n_total_nodes: n_rules + n_internal,
        n_antecedents: n_internal,
        contiguous_runs: runs,
        test_mse,
        r_squared,
    })
}
