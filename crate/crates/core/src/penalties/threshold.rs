use crate::error::{Error, Result};

/// `sign(x) * max(|x| - tau, 0)`.
pub fn soft_threshold(theta_hat: f64, tau: f64) -> f64 {
    let shrunk = theta_hat.abs() - tau;
    if shrunk > 0.0 {
        shrunk.copysign(theta_hat)
    } else {
        0.0
    }
}

/// Firm thresholding: the minimizer of `0.5 (t - x)^2 + MCP(t; lambda, gamma)`.
///
/// Inputs with `|x| <= lambda * gamma` are soft-thresholded at `lambda` and
/// rescaled by `gamma / (gamma - 1)`; larger inputs pass through unchanged.
/// The two branches meet at `|x| = lambda * gamma`.
pub fn mcp_threshold(theta_hat: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "MCP gamma must exceed 1, got {gamma}"
        )));
    }
    Ok(firm(theta_hat, lambda, gamma))
}

fn firm(theta_hat: f64, lambda: f64, gamma: f64) -> f64 {
    if theta_hat.abs() > lambda * gamma {
        theta_hat
    } else {
        gamma / (gamma - 1.0) * soft_threshold(theta_hat, lambda)
    }
}

/// Exact minimizer of `(step/2)(t - x)^2 + MCP(t; lambda, gamma)` for any `step > 0`.
///
/// Dividing by `step` gives an MCP with parameters `(lambda / step, gamma * step)`,
/// which is firm thresholding when `gamma * step > 1`. Otherwise the objective is
/// concave on `[0, lambda * gamma]` and the minimizer is 0 or lies in the flat region.
pub(crate) fn mcp_prox(theta_hat: f64, lambda: f64, gamma: f64, step: f64) -> f64 {
    if lambda == 0.0 {
        return theta_hat;
    }
    let scaled_gamma = gamma * step;
    if scaled_gamma > 1.0 {
        return firm(theta_hat, lambda / step, scaled_gamma);
    }
    let a = theta_hat.abs();
    let knee = lambda * gamma;
    let flat = 0.5 * gamma * lambda * lambda;
    let (candidate, value) = if a > knee {
        (theta_hat, flat)
    } else {
        (
            knee.copysign(theta_hat),
            0.5 * step * (knee - a).powi(2) + flat,
        )
    };
    if value < 0.5 * step * a * a {
        candidate
    } else {
        0.0
    }
}

/// `P(w) = lambda |w| - w^2 / (2 gamma)` for `|w| <= lambda gamma`, else `gamma lambda^2 / 2`.
pub fn mcp_value(w: f64, lambda: f64, gamma: f64) -> f64 {
    let a = w.abs();
    if a <= lambda * gamma {
        lambda * a - a * a / (2.0 * gamma)
    } else {
        0.5 * gamma * lambda * lambda
    }
}
