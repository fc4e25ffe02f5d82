//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rulefuse::penalties::{mcp_value, PenaltyConfig, PenaltyKind};

/// Minimum of `(L/2)||t - theta_hat||^2 + h(t) + lambda_f * TV(t)` over the
/// lattice `lo + k * step` per coordinate, `lo = min(theta_hat) - 1`,
/// `hi = max(theta_hat) + 1`. Exhaustive over the lattice; the chain structure
/// lets the search run as an exact min-plus recursion.
pub fn grid_prox_minimum(theta_hat: &[f64], l: f64, cfg: &PenaltyConfig, step: f64) -> f64 {
    let lo = theta_hat.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = theta_hat.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let k = ((hi - lo) / step).floor() as usize + 1;
    let grid: Vec<f64> = (0..k).map(|i| lo + i as f64 * step).collect();
    let sparsity = |t: f64| match cfg.kind {
        PenaltyKind::L1 => cfg.lambda_s * t.abs(),
        PenaltyKind::Mcp => mcp_value(t, cfg.lambda_s, cfg.gamma),
    };
    let unary = |j: usize, t: f64| 0.5 * l * (t - theta_hat[j]).powi(2) + sparsity(t);

    let mut msg: Vec<f64> = grid.iter().map(|&t| unary(0, t)).collect();
    for j in 1..theta_hat.len() {
        let next: Vec<f64> = grid
            .iter()
            .map(|&t| {
                let best = grid
                    .iter()
                    .zip(&msg)
                    .map(|(&s, &m)| m + cfg.lambda_f * (t - s).abs())
                    .fold(f64::INFINITY, f64::min);
                best + unary(j, t)
            })
            .collect();
        msg = next;
    }
    msg.into_iter().fold(f64::INFINITY, f64::min)
}

/// Grid minimum of the plain FLSA objective `0.5||t - y||^2 + tau TV(t)`.
pub fn grid_flsa_minimum(y: &[f64], tau: f64, step: f64) -> f64 {
    grid_prox_minimum(y, 1.0, &PenaltyConfig::l1(0.0, tau), step)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Dense design matrix (column-major) built by routing each row through each
/// tree directly: entry `(i, col)` is the leaf value when row `i` lands in
/// that leaf.
pub fn dense_design(
    ensemble: &rulefuse::ensemble::TreeEnsemble,
    data: &rulefuse::Dataset,
) -> Vec<Vec<f64>> {
    let mut cols = Vec::new();
    for tree in ensemble.trees() {
        let base = cols.len();
        cols.extend((0..tree.n_leaves()).map(|_| vec![0.0; data.n_rows()]));
        for (i, x) in data.rows().enumerate() {
            let leaf = tree.route(x);
            cols[base + leaf][i] = tree.leaf_value(leaf);
        }
    }
    cols
}

pub fn dense_residual(cols: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut r = y.to_vec();
    for (c, &wj) in cols.iter().zip(w) {
        if wj != 0.0 {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= ci * wj;
            }
        }
    }
    r
}

/// `0.5 ||y - X w||^2 + lambda ||w||_1` on a dense design.
pub fn lasso_objective(cols: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> f64 {
    let r = dense_residual(cols, y, w);
    0.5 * r.iter().map(|v| v * v).sum::<f64>() + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Coordinate-wise cyclic descent for the lasso, run until a full pass
/// changes the objective by less than `rel_tol` (relative).
pub fn lasso_cd(
    cols: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    rel_tol: f64,
    max_passes: usize,
) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; cols.len()];
    let mut r = y.to_vec();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut obj = lasso_objective(cols, y, &w, lambda);
    for _ in 0..max_passes {
        for j in 0..cols.len() {
            if norms[j] == 0.0 {
                continue;
            }
            let rho: f64 =
                cols[j].iter().zip(&r).map(|(c, ri)| c * ri).sum::<f64>() + norms[j] * w[j];
            let new = rho.signum() * (rho.abs() - lambda).max(0.0) / norms[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (ri, c) in r.iter_mut().zip(&cols[j]) {
                    *ri -= c * delta;
                }
                w[j] = new;
            }
        }
        let next = lasso_objective(cols, y, &w, lambda);
        let done = (obj - next).abs() <= rel_tol * next.abs();
        obj = next;
        if done {
            break;
        }
    }
    (w, obj)
}

/// Bagged forest on Friedman #1 data, with the centered problem.
pub fn forest_problem(
    seed: u64,
    n_rows: usize,
    n_trees: usize,
    depth: usize,
) -> (
    rulefuse::ensemble::TreeEnsemble,
    rulefuse::Dataset,
    rulefuse::problem::FitProblem,
) {
    let data = rulefuse::synth::friedman1(n_rows, 1.0, seed).unwrap();
    let cfg = rulefuse::ensemble::BaggingConfig {
        n_trees,
        max_depth: depth,
        seed,
        ..Default::default()
    };
    let ensemble = rulefuse::ensemble::train_bagged_ensemble(&data, &cfg).unwrap();
    let problem = rulefuse::problem::FitProblem::new(&ensemble, &data).unwrap();
    (ensemble, data, problem)
}
