//! JSON persistence for ensembles.
//!
//! Node ids in a document are arbitrary integers; the canonical leaf order is
//! recomputed on load and never stored.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, Node};
use super::TreeEnsemble;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct EnsembleDoc {
    n_features: usize,
    trees: Vec<TreeDoc>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    root: i64,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
}

fn tree_to_doc(tree: &DecisionTree) -> TreeDoc {
    let nodes = tree
        .nodes()
        .iter()
        .enumerate()
        .map(|(id, node)| match *node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => NodeDoc {
                id: id as i64,
                feature: Some(feature),
                threshold: Some(threshold),
                left: Some(left as i64),
                right: Some(right as i64),
                value: None,
                count: None,
            },
            Node::Leaf { value, count } => NodeDoc {
                id: id as i64,
                feature: None,
                threshold: None,
                left: None,
                right: None,
                value: Some(value),
                count: Some(count),
            },
        })
        .collect();
    TreeDoc {
        root: tree.root() as i64,
        nodes,
    }
}

fn tree_from_doc(t: usize, doc: &TreeDoc) -> Result<DecisionTree> {
    let fail = |msg: String| Error::Parse(format!("tree {t}: {msg}"));
    let mut index = HashMap::with_capacity(doc.nodes.len());
    for (k, node) in doc.nodes.iter().enumerate() {
        if index.insert(node.id, k).is_some() {
            return Err(fail(format!("duplicate node id {}", node.id)));
        }
    }
    let lookup = |owner: i64, child: Option<i64>, side: &str| -> Result<usize> {
        let child = child.ok_or_else(|| fail(format!("split node {owner} has no {side} child")))?;
        index
            .get(&child)
            .copied()
            .ok_or_else(|| fail(format!("node {owner}: {side} child {child} does not exist")))
    };

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for node in &doc.nodes {
        let is_split = node.feature.is_some() || node.left.is_some() || node.right.is_some();
        if is_split {
            let feature = node
                .feature
                .ok_or_else(|| fail(format!("split node {} has no feature", node.id)))?;
            let threshold = node
                .threshold
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("split node {} needs a finite threshold", node.id)))?;
            nodes.push(Node::Split {
                feature,
                threshold,
                left: lookup(node.id, node.left, "left")?,
                right: lookup(node.id, node.right, "right")?,
            });
        } else {
            let value = node
                .value
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("leaf node {} needs a finite value", node.id)))?;
            nodes.push(Node::Leaf {
                value,
                count: node.count.unwrap_or(0),
            });
        }
    }
    let root = *index
        .get(&doc.root)
        .ok_or_else(|| fail(format!("root {} does not exist", doc.root)))?;
    DecisionTree::new(nodes, root).map_err(|e| match e {
        Error::Parse(msg) => fail(msg),
        other => other,
    })
}

impl TreeEnsemble {
    pub fn to_json_string(&self) -> Result<String> {
        let doc = EnsembleDoc {
            n_features: self.n_features(),
            trees: self.trees().iter().map(tree_to_doc).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: EnsembleDoc = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let trees = doc
            .trees
            .iter()
            .enumerate()
            .map(|(t, d)| tree_from_doc(t, d))
            .collect::<Result<Vec<_>>>()?;
        TreeEnsemble::new(trees, doc.n_features)
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
