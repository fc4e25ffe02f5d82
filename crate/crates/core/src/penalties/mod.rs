//! Sparsity and fusion penalties with their proximal operators.

mod flsa;
mod subgradient;
mod threshold;

pub use flsa::{flsa, flsa_into, flsa_objective, FlsaWorkspace};
pub use subgradient::{
    steepest_coordinate, subgradient_interval, NeighborContext, SubgradientInterval,
};
pub use threshold::{mcp_threshold, mcp_value, soft_threshold};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::BlockedWeights;
use threshold::mcp_prox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    L1,
    Mcp,
}

/// Regularization hyperparameters. `gamma` is only read for MCP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub lambda_s: f64,
    pub gamma: f64,
    pub lambda_f: f64,
}

impl PenaltyConfig {
    pub fn l1(lambda_s: f64, lambda_f: f64) -> Self {
        Self {
            kind: PenaltyKind::L1,
            lambda_s,
            gamma: f64::INFINITY,
            lambda_f,
        }
    }

    pub fn mcp(lambda_s: f64, gamma: f64, lambda_f: f64) -> Self {
        Self {
            kind: PenaltyKind::Mcp,
            lambda_s,
            gamma,
            lambda_f,
        }
    }

    pub fn with_lambdas(self, lambda_s: f64, lambda_f: f64) -> Self {
        Self {
            lambda_s,
            lambda_f,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        nonneg("lambda_s", self.lambda_s)?;
        nonneg("lambda_f", self.lambda_f)?;
        if self.kind == PenaltyKind::Mcp && !(self.gamma > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "MCP gamma must exceed 1, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// The penalty one block sees in the solver. MCP curvature is measured in
    /// units of the block's step, so `gamma` becomes `gamma / lipschitz` and
    /// the block prox at step `1/lipschitz` is firm thresholding at
    /// `(lambda_s / lipschitz, gamma)`.
    pub fn for_block(&self, lipschitz: f64) -> Self {
        match self.kind {
            PenaltyKind::Mcp if lipschitz > 0.0 => Self {
                gamma: self.gamma / lipschitz,
                ..*self
            },
            _ => *self,
        }
    }

    /// Weaker check for configs produced by [`PenaltyConfig::for_block`].
    fn check_scaled(&self) -> Result<()> {
        if !(self.lambda_s.is_finite()
            && self.lambda_s >= 0.0
            && self.lambda_f.is_finite()
            && self.lambda_f >= 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "lambdas must be finite and >= 0, got {} and {}",
                self.lambda_s, self.lambda_f
            )));
        }
        if self.kind == PenaltyKind::Mcp && !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "MCP gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Thresholding step of the block prox for one coordinate, at step size `1/step`.
    fn threshold(&self, x: f64, step: f64) -> f64 {
        match self.kind {
            PenaltyKind::L1 => soft_threshold(x, self.lambda_s / step),
            PenaltyKind::Mcp => mcp_prox(x, self.lambda_s, self.gamma, step),
        }
    }
}

/// Sparsity plus fusion penalty of one block in canonical leaf order.
pub fn block_penalty(w_t: &[f64], cfg: &PenaltyConfig) -> f64 {
    let sparsity: f64 = match cfg.kind {
        PenaltyKind::L1 => cfg.lambda_s * w_t.iter().map(|w| w.abs()).sum::<f64>(),
        PenaltyKind::Mcp => w_t
            .iter()
            .map(|&w| mcp_value(w, cfg.lambda_s, cfg.gamma))
            .sum(),
    };
    let fusion = if cfg.lambda_f > 0.0 {
        cfg.lambda_f * w_t.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>()
    } else {
        0.0
    };
    sparsity + fusion
}

/// `h(w, lambda_s) + g(w, lambda_f)` summed over blocks.
pub fn penalty_value(w: &BlockedWeights, cfg: &PenaltyConfig) -> f64 {
    w.blocks().map(|b| block_penalty(b, cfg)).sum()
}

/// Block proximal subproblem `argmin (L/2)||t - theta_hat||^2 + h(t) + g(t)`.
#[derive(Debug, Clone, Copy)]
pub struct ProxProblem<'a> {
    pub theta_hat: &'a [f64],
    /// The block Lipschitz constant `L`.
    pub step_scale: f64,
    pub config: &'a PenaltyConfig,
}

impl ProxProblem<'_> {
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let fit: f64 = theta
            .iter()
            .zip(self.theta_hat)
            .map(|(t, h)| (t - h).powi(2))
            .sum();
        0.5 * self.step_scale * fit + block_penalty(theta, self.config)
    }
}

/// Scratch space for [`prox_into`].
#[derive(Debug, Default, Clone)]
pub struct ProxWorkspace {
    flsa: FlsaWorkspace,
    candidate: Vec<f64>,
}

impl ProxWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn prox(p: &ProxProblem) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p.theta_hat.len()];
    prox_into(p, None, &mut out, &mut ProxWorkspace::new())?;
    Ok(out)
}

/// Solves the block prox into `out`.
///
/// Without fusion this is elementwise thresholding at `lambda_s / L`. With
/// fusion the chain is first smoothed by FLSA at `lambda_f / L` and then
/// thresholded. For MCP the composed problem is not convex, so the direct
/// threshold of `theta_hat` and the optional `incumbent` (typically the current
/// block weights) are also scored and the lowest subproblem objective wins.
pub fn prox_into(
    p: &ProxProblem,
    incumbent: Option<&[f64]>,
    out: &mut [f64],
    ws: &mut ProxWorkspace,
) -> Result<()> {
    let cfg = p.config;
    let step = p.step_scale;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "prox step scale must be positive, got {step}"
        )));
    }
    cfg.check_scaled()?;
    let n = p.theta_hat.len();
    if out.len() != n {
        return Err(Error::dims("prox output", n, out.len()));
    }

    let fused = cfg.lambda_f > 0.0 && n > 1;
    if fused {
        flsa_into(p.theta_hat, cfg.lambda_f / step, out, &mut ws.flsa);
        out.iter_mut().for_each(|t| *t = cfg.threshold(*t, step));
    } else {
        for (t, &x) in out.iter_mut().zip(p.theta_hat) {
            *t = cfg.threshold(x, step);
        }
    }

    if cfg.kind == PenaltyKind::Mcp {
        let mut best = p.objective(out);
        if fused {
            ws.candidate.clear();
            ws.candidate
                .extend(p.theta_hat.iter().map(|&x| cfg.threshold(x, step)));
            let value = p.objective(&ws.candidate);
            if value < best {
                best = value;
                out.copy_from_slice(&ws.candidate);
            }
        }
        if let Some(current) = incumbent {
            if current.len() == n && p.objective(current) < best {
                out.copy_from_slice(current);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_have_zero_penalty() {
        let w = BlockedWeights::from_parts(vec![0.0; 5], vec![0, 2, 5]).unwrap();
        assert_eq!(penalty_value(&w, &PenaltyConfig::mcp(1.0, 2.0, 3.0)), 0.0);
    }

    #[test]
    fn mcp_saturates() {
        let w = BlockedWeights::from_parts(vec![5.0], vec![0, 1]).unwrap();
        assert_eq!(
            penalty_value(&w, &PenaltyConfig::mcp(1.5, 2.0, 0.0)),
            0.5 * 2.0 * 1.5 * 1.5
        );
    }

    #[test]
    fn fusion_by_hand() {
        let w = BlockedWeights::from_parts(vec![1.0, -1.0], vec![0, 2]).unwrap();
        assert_eq!(penalty_value(&w, &PenaltyConfig::l1(0.0, 2.0)), 4.0);
        // split into single-leaf trees: no fusion terms
        let w = BlockedWeights::from_parts(vec![1.0, -1.0], vec![0, 1, 2]).unwrap();
        assert_eq!(penalty_value(&w, &PenaltyConfig::l1(0.0, 2.0)), 0.0);
    }

    #[test]
    fn no_penalty_is_identity() {
        let cfg = PenaltyConfig::mcp(0.0, 3.0, 0.0);
        let th = [0.3, -2.0, 7.5];
        let p = ProxProblem {
            theta_hat: &th,
            step_scale: 2.0,
            config: &cfg,
        };
        assert_eq!(prox(&p).unwrap(), th.to_vec());
        let cfg = PenaltyConfig::l1(0.0, 0.0);
        let p = ProxProblem {
            theta_hat: &th,
            step_scale: 2.0,
            config: &cfg,
        };
        assert_eq!(prox(&p).unwrap(), th.to_vec());
    }

    #[test]
    fn l1_with_fusion_composes() {
        let cfg = PenaltyConfig::l1(1.0, 0.5);
        let p = ProxProblem {
            theta_hat: &[3.0, 1.0],
            step_scale: 1.0,
            config: &cfg,
        };
        assert_eq!(prox(&p).unwrap(), vec![1.5, 0.5]);
    }

    #[test]
    fn invalid_inputs() {
        let cfg = PenaltyConfig::mcp(1.0, 0.0, 0.0);
        let p = ProxProblem {
            theta_hat: &[1.0],
            step_scale: 1.0,
            config: &cfg,
        };
        assert!(prox(&p).is_err());
        assert!(PenaltyConfig::mcp(1.0, 0.9, 0.0).validate().is_err());
        let cfg = PenaltyConfig::l1(1.0, 0.0);
        let p = ProxProblem {
            theta_hat: &[1.0],
            step_scale: 0.0,
            config: &cfg,
        };
        assert!(prox(&p).is_err());
        assert!(PenaltyConfig::l1(-1.0, 0.0).validate().is_err());
        assert!(PenaltyConfig::l1(1.0, f64::NAN).validate().is_err());
    }

    #[test]
    fn incumbent_wins_when_better() {
        let cfg = PenaltyConfig::mcp(1.0, 1.1, 1.0);
        let th = [0.2, 0.1];
        let p = ProxProblem {
            theta_hat: &th,
            step_scale: 1.0,
            config: &cfg,
        };
        let mut out = vec![9.0; 2];
        prox_into(&p, Some(&[5.0, 5.0]), &mut out, &mut ProxWorkspace::new()).unwrap();
        // zero beats the far-away incumbent
        assert_eq!(out, vec![0.0, 0.0]);
    }
}
