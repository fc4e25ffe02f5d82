use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arena node. Children are indices into the owning tree's node list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        /// Training rows routed here; 0 means unknown (imported trees).
        count: usize,
    },
}

/// Branch direction of a split: `Le` is the left branch (`x <= t`), `Gt` the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Antecedent {
    pub feature: usize,
    #[serde(rename = "op")]
    pub direction: Direction,
    pub threshold: f64,
}

impl Antecedent {
    pub fn holds(&self, x: &[f64]) -> bool {
        match self.direction {
            Direction::Le => x[self.feature] <= self.threshold,
            Direction::Gt => x[self.feature] > self.threshold,
        }
    }
}

/// Leaf rule: conjunction of antecedents (root to leaf) with the leaf value.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub antecedents: Vec<Antecedent>,
    pub value: f64,
    pub tree_index: usize,
    pub leaf_index: usize,
}

impl Rule {
    pub fn covers(&self, x: &[f64]) -> bool {
        self.antecedents.iter().all(|a| a.holds(x))
    }

    /// `value` if every antecedent holds, else 0.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        if self.covers(x) {
            self.value
        } else {
            0.0
        }
    }
}

/// Binary regression tree with leaves indexed in depth-first, left-first order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: usize,
    leaves: Vec<usize>,
    leaf_position: Vec<Option<usize>>,
    parent: Vec<Option<usize>>,
    /// Half-open range of leaf positions below each node.
    span: Vec<(usize, usize)>,
    /// Node ids in pre-order.
    preorder: Vec<usize>,
    depth: usize,
}

impl DecisionTree {
    /// Validates the arena and derives the canonical leaf order.
    ///
    /// Every node must be reachable from `root` exactly once.
    pub fn new(nodes: Vec<Node>, root: usize) -> Result<Self> {
        let n = nodes.len();
        if root >= n {
            return Err(Error::Parse(format!(
                "root {root} is not a node (tree has {n} nodes)"
            )));
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut node_depth = vec![0usize; n];
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(id) = stack.pop() {
            preorder.push(id);
            if let Node::Split { left, right, .. } = nodes[id] {
                if left == right {
                    return Err(Error::Parse(format!(
                        "node {id}: left and right child are both {left}"
                    )));
                }
                for child in [right, left] {
                    if child >= n {
                        return Err(Error::Parse(format!(
                            "node {id}: child {child} does not exist"
                        )));
                    }
                    if seen[child] {
                        return Err(Error::Parse(format!(
                            "node {id}: child {child} is already referenced elsewhere"
                        )));
                    }
                    seen[child] = true;
                    parent[child] = Some(id);
                    node_depth[child] = node_depth[id] + 1;
                    stack.push(child);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Parse(format!(
                "node {orphan} is not reachable from the root"
            )));
        }

        let mut leaves = Vec::new();
        let mut leaf_position = vec![None; n];
        for &id in &preorder {
            if matches!(nodes[id], Node::Leaf { .. }) {
                leaf_position[id] = Some(leaves.len());
                leaves.push(id);
            }
        }
        let mut span = vec![(0, 0); n];
        for &id in preorder.iter().rev() {
            span[id] = match nodes[id] {
                Node::Leaf { .. } => {
                    let p = leaf_position[id].expect("leaf has a position");
                    (p, p + 1)
                }
                Node::Split { left, right, .. } => (span[left].0, span[right].1),
            };
        }
        let depth = leaves.iter().map(|&id| node_depth[id]).max().unwrap_or(0);
        Ok(Self {
            nodes,
            root,
            leaves,
            leaf_position,
            parent,
            span,
            preorder,
            depth,
        })
    }

    /// Single-leaf tree.
    pub fn constant(value: f64, count: usize) -> Self {
        Self::new(vec![Node::Leaf { value, count }], 0).expect("single leaf is valid")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() - self.leaves.len()
    }

    /// Node ids of the leaves in canonical order.
    pub fn leaf_nodes(&self) -> &[usize] {
        &self.leaves
    }

    /// Node ids in pre-order (root first, left subtree before right).
    pub fn preorder(&self) -> &[usize] {
        &self.preorder
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Range of canonical leaf positions covered by `node`'s subtree.
    pub fn leaf_span(&self, node: usize) -> std::ops::Range<usize> {
        let (a, b) = self.span[node];
        a..b
    }

    pub fn leaf_value(&self, leaf: usize) -> f64 {
        match self.nodes[self.leaves[leaf]] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf list holds only leaves"),
        }
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        (0..self.n_leaves()).map(|j| self.leaf_value(j)).collect()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Canonical position of the leaf reached by `x`. Ties `x == threshold` go left.
    pub fn route(&self, x: &[f64]) -> usize {
        let mut id = self.root;
        loop {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return self.leaf_position[id].expect("leaf has a position"),
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaf_value(self.route(x))
    }

    /// Rule for the leaf at canonical position `leaf`, antecedents ordered root to leaf.
    pub fn rule_of_leaf(&self, tree_index: usize, leaf: usize) -> Result<Rule> {
        if leaf >= self.leaves.len() {
            return Err(Error::OutOfRange {
                index: leaf,
                len: self.leaves.len(),
            });
        }
        let mut antecedents = Vec::with_capacity(self.depth);
        let mut child = self.leaves[leaf];
        while let Some(p) = self.parent[child] {
            if let Node::Split {
                feature,
                threshold,
                left,
                ..
            } = self.nodes[p]
            {
                let direction = if left == child {
                    Direction::Le
                } else {
                    Direction::Gt
                };
                antecedents.push(Antecedent {
                    feature,
                    direction,
                    threshold,
                });
            }
            child = p;
        }
        antecedents.reverse();
        Ok(Rule {
            antecedents,
            value: self.leaf_value(leaf),
            tree_index,
            leaf_index: leaf,
        })
    }
}
