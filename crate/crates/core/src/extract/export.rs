//! Text and JSON renderings of rule sets.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExtractedRuleSet, WeightedRule};
use crate::ensemble::{Antecedent, Direction, Rule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleFormat {
    Text,
    Json,
}

impl FromStr for RuleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown rule format '{other}'"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RuleDoc {
    tree: usize,
    leaf: usize,
    weight: f64,
    /// Leaf value; the rule contributes `weight * value` when it fires.
    value: f64,
    antecedents: Vec<Antecedent>,
}

#[derive(Serialize, Deserialize)]
struct RuleSetDoc {
    intercept: f64,
    rules: Vec<RuleDoc>,
}

fn clause(a: &Antecedent) -> String {
    let op = match a.direction {
        Direction::Le => "<=",
        Direction::Gt => ">",
    };
    format!("x[{}] {op} {}", a.feature, a.threshold)
}

impl ExtractedRuleSet {
    /// Rules ordered by decreasing `|weight|`, ties by (tree, leaf).
    fn ranked(&self) -> Vec<&WeightedRule> {
        let mut rules: Vec<&WeightedRule> = self.rules.iter().collect();
        rules.sort_by(|a, b| {
            b.weight
                .abs()
                .total_cmp(&a.weight.abs())
                .then(a.rule.tree_index.cmp(&b.rule.tree_index))
                .then(a.rule.leaf_index.cmp(&b.rule.leaf_index))
        });
        rules
    }

    /// One `IF ... THEN weight` line per rule, largest `|weight|` first, with
    /// the intercept on the last line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in self.ranked() {
            let body = if r.rule.antecedents.is_empty() {
                "TRUE".to_string()
            } else {
                r.rule
                    .antecedents
                    .iter()
                    .map(clause)
                    .collect::<Vec<_>>()
                    .join(" AND ")
            };
            let _ = writeln!(
                out,
                "IF {body} THEN {}    # tree {} leaf {} value {}",
                r.weight, r.rule.tree_index, r.rule.leaf_index, r.rule.value
            );
        }
        let _ = writeln!(out, "INTERCEPT {}", self.intercept);
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        let doc = RuleSetDoc {
            intercept: self.intercept,
            rules: self
                .ranked()
                .into_iter()
                .map(|r| RuleDoc {
                    tree: r.rule.tree_index,
                    leaf: r.rule.leaf_index,
                    weight: r.weight,
                    value: r.rule.value,
                    antecedents: r.rule.antecedents.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: RuleSetDoc = serde_json::from_str(s)?;
        Ok(Self {
            intercept: doc.intercept,
            rules: doc
                .rules
                .into_iter()
                .map(|r| WeightedRule {
                    rule: Rule {
                        antecedents: r.antecedents,
                        value: r.value,
                        tree_index: r.tree,
                        leaf_index: r.leaf,
                    },
                    weight: r.weight,
                })
                .collect(),
            penalty: None,
        })
    }

    pub fn save<P: AsRef<Path>>(&self, path: P, format: RuleFormat) -> Result<()> {
        let body = match format {
            RuleFormat::Text => self.to_text(),
            RuleFormat::Json => self.to_json_string()?,
        };
        std::fs::write(path, body)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
