//! Warm-started regularization paths over a geometric `lambda_s` grid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{gbcd_solve, lambda_max, SolverConfig};
use crate::error::{Error, Result};
use crate::mapping::{BlockedWeights, MappingMatrix};
use crate::penalties::{PenaltyConfig, PenaltyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub kind: PenaltyKind,
    pub n_grid: usize,
    pub lambda_min_ratio: f64,
    /// `lambda_f = lambda_f_ratio * lambda_s` at every grid point.
    pub lambda_f_ratio: f64,
    pub gamma: f64,
    /// Start each point from the previous solution instead of zero.
    pub warm_start: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            kind: PenaltyKind::Mcp,
            n_grid: 100,
            lambda_min_ratio: 1e-3,
            lambda_f_ratio: 0.5,
            gamma: 1.1,
            warm_start: true,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 2 {
            return Err(Error::InvalidConfig(
                "a path needs at least 2 grid points".into(),
            ));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda_min_ratio must lie in (0, 1), got {}",
                self.lambda_min_ratio
            )));
        }
        if !(self.lambda_f_ratio >= 0.0 && self.lambda_f_ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_f_ratio must be finite and >= 0, got {}",
                self.lambda_f_ratio
            )));
        }
        self.penalty(1.0).validate()
    }

    pub fn penalty(&self, lambda_s: f64) -> PenaltyConfig {
        PenaltyConfig {
            kind: self.kind,
            lambda_s,
            gamma: if self.kind == PenaltyKind::Mcp {
                self.gamma
            } else {
                f64::INFINITY
            },
            lambda_f: self.lambda_f_ratio * lambda_s,
        }
    }
}

/// Held-out rows mapped through the same trees; `target` is centered with the
/// training mean.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub matrix: &'a MappingMatrix,
    pub target: &'a [f64],
}

impl Validation<'_> {
    pub fn mse(&self, w: &[f64]) -> Result<f64> {
        let fitted = self.matrix.predict(w)?;
        let sse: f64 = self
            .target
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (y - f).powi(2))
            .sum();
        Ok(sse / self.target.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub lambda_s: f64,
    pub lambda_f: f64,
    pub weights: Vec<f64>,
    pub n_nonzero: usize,
    pub train_objective: f64,
    pub validation_mse: Option<f64>,
    pub n_block_updates: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub points: Vec<PathPoint>,
    /// Block boundaries of every point's weight vector.
    pub offsets: Vec<usize>,
    /// Constant added to every prediction; [`path_solve`] leaves it at zero
    /// and callers that center the target store the mean here.
    pub intercept: f64,
}

#[derive(Serialize, Deserialize)]
struct PointDoc {
    lambda_s: f64,
    lambda_f: f64,
    n_nonzero: usize,
    train_objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    validation_mse: Option<f64>,
    intercept: f64,
    n_block_updates: usize,
    converged: bool,
    weights: BTreeMap<usize, f64>,
}

impl PathResult {
    pub fn total_block_updates(&self) -> usize {
        self.points.iter().map(|p| p.n_block_updates).sum()
    }

    /// JSON array with one object per grid point; weights are stored sparsely
    /// as `{column: weight}`.
    pub fn to_json_string(&self) -> Result<String> {
        let docs: Vec<PointDoc> = self
            .points
            .iter()
            .map(|p| PointDoc {
                lambda_s: p.lambda_s,
                lambda_f: p.lambda_f,
                n_nonzero: p.n_nonzero,
                train_objective: p.train_objective,
                validation_mse: p.validation_mse,
                intercept: self.intercept,
                n_block_updates: p.n_block_updates,
                converged: p.converged,
                weights: p
                    .weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(j, w)| (j, *w))
                    .collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&docs)?)
    }

    /// Parses [`PathResult::to_json_string`] output for a matrix with the
    /// given block `offsets`.
    pub fn from_json_str(s: &str, offsets: &[usize]) -> Result<Self> {
        let docs: Vec<PointDoc> = serde_json::from_str(s)?;
        let n_columns = offsets.last().copied().unwrap_or(0);
        let intercept = docs.first().map_or(0.0, |d| d.intercept);
        let mut points = Vec::with_capacity(docs.len());
        for (i, d) in docs.into_iter().enumerate() {
            let mut weights = vec![0.0; n_columns];
            for (j, w) in d.weights {
                if j >= n_columns {
                    return Err(Error::Parse(format!(
                        "path point {i}: weight column {j} is out of range for {n_columns} columns"
                    )));
                }
                weights[j] = w;
            }
            if d.intercept != intercept {
                return Err(Error::Parse(format!(
                    "path point {i}: intercept differs from point 0"
                )));
            }
            points.push(PathPoint {
                lambda_s: d.lambda_s,
                lambda_f: d.lambda_f,
                weights,
                n_nonzero: d.n_nonzero,
                train_objective: d.train_objective,
                validation_mse: d.validation_mse,
                n_block_updates: d.n_block_updates,
                converged: d.converged,
            });
        }
        Ok(Self {
            points,
            offsets: offsets.to_vec(),
            intercept,
        })
    }

    pub fn weights(&self, index: usize) -> Result<BlockedWeights> {
        let p = self.points.get(index).ok_or(Error::OutOfRange {
            index,
            len: self.points.len(),
        })?;
        BlockedWeights::from_parts(p.weights.clone(), self.offsets.clone())
    }
}

/// `n_grid` values from `lambda_max` down to `lambda_min_ratio * lambda_max`, geometric.
pub fn lambda_grid(lambda_max: f64, n_grid: usize, lambda_min_ratio: f64) -> Vec<f64> {
    let last = (n_grid - 1) as f64;
    (0..n_grid)
        .map(|k| {
            if k == 0 {
                lambda_max
            } else {
                lambda_max * lambda_min_ratio.powf(k as f64 / last)
            }
        })
        .collect()
}

/// Solves along the grid, each point warm-started from the previous one.
pub fn path_solve(
    matrix: &MappingMatrix,
    y: &[f64],
    path: &PathConfig,
    solver: &SolverConfig,
    validation: Option<Validation>,
) -> Result<PathResult> {
    path.validate()?;
    let top = lambda_max(matrix, y)?;
    if !(top > 0.0) {
        return Err(Error::InvalidInput(
            "lambda_max is zero: the target is orthogonal to every rule".into(),
        ));
    }
    if let Some(v) = validation {
        if v.matrix.n_columns() != matrix.n_columns() || v.target.len() != v.matrix.n_rows() {
            return Err(Error::dims(
                "validation set",
                matrix.n_columns(),
                v.matrix.n_columns(),
            ));
        }
    }

    let mut points = Vec::with_capacity(path.n_grid);
    let mut previous: Option<BlockedWeights> = None;
    for (index, lambda_s) in lambda_grid(top, path.n_grid, path.lambda_min_ratio)
        .into_iter()
        .enumerate()
    {
        let cfg = path.penalty(lambda_s);
        let start = if path.warm_start {
            previous.as_ref()
        } else {
            None
        };
        let result = gbcd_solve(matrix, y, &cfg, solver, start).map_err(|e| Error::PathPoint {
            index,
            source: Box::new(e),
        })?;
        let validation_mse = validation
            .map(|v| v.mse(result.weights.as_slice()))
            .transpose()?;
        points.push(PathPoint {
            lambda_s,
            lambda_f: cfg.lambda_f,
            n_nonzero: result.weights.nnz(0.0),
            train_objective: result.final_objective,
            validation_mse,
            weights: result.weights.as_slice().to_vec(),
            n_block_updates: result.n_block_updates,
            converged: result.converged,
        });
        previous = Some(result.weights);
    }
    Ok(PathResult {
        points,
        offsets: matrix.offsets().to_vec(),
        intercept: 0.0,
    })
}

/// Index of the lowest validation error among points with at most `max_rules`
/// nonzero weights; ties go to the sparser point.
pub fn select_model(path: &PathResult, max_rules: usize) -> Result<usize> {
    let mut best: Option<(usize, f64, usize)> = None;
    for (i, p) in path.points.iter().enumerate() {
        let mse = p
            .validation_mse
            .ok_or_else(|| Error::InvalidInput(format!("path point {i} has no validation loss")))?;
        if p.n_nonzero > max_rules {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, m, nnz)) => mse < m || (mse == m && p.n_nonzero < nnz),
        };
        if better {
            best = Some((i, mse, p.n_nonzero));
        }
    }
    best.map(|(i, _, _)| i)
        .ok_or_else(|| Error::BudgetInfeasible {
            max_rules,
            sparsest: path.points.iter().map(|p| p.n_nonzero).min().unwrap_or(0),
        })
}
