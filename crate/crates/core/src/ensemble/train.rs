//! Greedy CART regression trees and bagged forests.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{DecisionTree, Node};
use super::TreeEnsemble;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Settings for a bagged ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct BaggingConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features drawn (without replacement) at every split.
    pub feature_subsample: f64,
    /// Draw an N-row bootstrap resample per tree; `false` fits every tree on all rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for BaggingConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            max_depth: 3,
            min_leaf: 1,
            feature_subsample: 1.0 / 3.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

struct Grower<'a> {
    data: &'a Dataset,
    max_depth: usize,
    min_leaf: usize,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    // reused buffer of (feature value, centered target)
    scratch: Vec<(f64, f64)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let mean = rows.iter().map(|&i| self.data.target()[i]).sum::<f64>() / n as f64;
        let sse: f64 = rows
            .iter()
            .map(|&i| (self.data.target()[i] - mean).powi(2))
            .sum();

        let split = if depth >= self.max_depth || n < 2 * self.min_leaf || sse <= 0.0 {
            None
        } else {
            self.best_split(rows, mean, sse)
        };

        let id = self.nodes.len();
        let Some(split) = split else {
            self.nodes.push(Node::Leaf {
                value: mean,
                count: n,
            });
            return id;
        };
        // placeholder, children are patched in once grown
        self.nodes.push(Node::Leaf {
            value: mean,
            count: n,
        });

        let (feature, threshold) = (split.feature, split.threshold);
        let mut n_left = 0;
        for k in 0..n {
            if self.data.value(rows[k], feature) <= threshold {
                rows.swap(k, n_left);
                n_left += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(n_left);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize], mean: f64, sse: f64) -> Option<Split> {
        let p = self.data.n_features();
        let features: Vec<usize> = if self.max_features >= p {
            (0..p).collect()
        } else {
            let mut f = index::sample(&mut self.rng, p, self.max_features).into_vec();
            f.sort_unstable();
            f
        };

        let n = rows.len();
        let mut best: Option<Split> = None;
        for feature in features {
            self.scratch.clear();
            self.scratch.extend(
                rows.iter()
                    .map(|&i| (self.data.value(i, feature), self.data.target()[i] - mean)),
            );
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

            // centered targets sum to ~0, so the gain is SL^2/nL + SR^2/nR
            let total: f64 = self.scratch.iter().map(|s| s.1).sum();
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.scratch[k - 1].1;
                if k < self.min_leaf || n - k < self.min_leaf {
                    continue;
                }
                let (lo, hi) = (self.scratch[k - 1].0, self.scratch[k].0);
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64
                    - total * total / n as f64;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + 0.5 * (hi - lo);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 1e-12 * sse)
    }
}

fn fit(
    data: &Dataset,
    rows: &mut [usize],
    max_depth: usize,
    min_leaf: usize,
    max_features: usize,
    rng: ChaCha8Rng,
) -> DecisionTree {
    let mut grower = Grower {
        data,
        max_depth,
        min_leaf,
        max_features,
        rng,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    let root = grower.grow(rows, 0);
    DecisionTree::new(grower.nodes, root).expect("grown trees are well formed")
}

fn check_params(min_leaf: usize) -> Result<()> {
    if min_leaf == 0 {
        return Err(Error::InvalidConfig("min_leaf must be at least 1".into()));
    }
    Ok(())
}

/// Fits a CART regression tree on all rows and all features.
///
/// Splits maximize the reduction in squared error over midpoints between
/// consecutive distinct feature values. Growth stops at `max_depth`, when a
/// node holds fewer than `2 * min_leaf` rows, or when no split reduces the
/// error. The seed only matters when features are subsampled, which this
/// entry point never does; it is kept so single-tree and bagged fits share
/// one calling convention.
pub fn train_tree(
    data: &Dataset,
    max_depth: usize,
    min_leaf: usize,
    rng_seed: u64,
) -> Result<DecisionTree> {
    check_params(min_leaf)?;
    let mut rows: Vec<usize> = (0..data.n_rows()).collect();
    let rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(fit(
        data,
        &mut rows,
        max_depth,
        min_leaf,
        data.n_features(),
        rng,
    ))
}

/// Bagged forest: tree `t` uses ChaCha stream `t` of `seed` for its bootstrap
/// draw and per-split feature subsets, so results do not depend on thread scheduling.
pub fn train_bagged_ensemble(data: &Dataset, cfg: &BaggingConfig) -> Result<TreeEnsemble> {
    check_params(cfg.min_leaf)?;
    if cfg.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    if !(cfg.feature_subsample > 0.0 && cfg.feature_subsample <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "feature_subsample must lie in (0, 1], got {}",
            cfg.feature_subsample
        )));
    }
    let p = data.n_features();
    let max_features = ((cfg.feature_subsample * p as f64).ceil() as usize).clamp(1, p);
    let n = data.n_rows();

    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let mut rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit(
                data,
                &mut rows,
                cfg.max_depth,
                cfg.min_leaf,
                max_features,
                rng,
            )
        })
        .collect();
    TreeEnsemble::new(trees, p)
}
