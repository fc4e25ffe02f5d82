//! Synthetic regression data for tests, benchmarks, and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Number of features produced by [`friedman1`].
pub const FRIEDMAN_FEATURES: usize = 10;

/// Noise-free Friedman #1 response; only the first five features matter.
pub fn friedman1_mean(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
        + 20.0 * (x[2] - 0.5).powi(2)
        + 10.0 * x[3]
        + 5.0 * x[4]
}

/// `n` rows of uniform features on `[0, 1]^10` with the Friedman #1 response
/// plus Gaussian noise of standard deviation `noise_sd`.
pub fn friedman1(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise_sd must be finite and >= 0, got {noise_sd}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut features = Vec::with_capacity(n * FRIEDMAN_FEATURES);
    let mut target = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..FRIEDMAN_FEATURES)
            .map(|_| rng.random::<f64>())
            .collect();
        target.push(friedman1_mean(&row) + noise.sample(&mut rng));
        features.extend(row);
    }
    let names = (0..FRIEDMAN_FEATURES).map(|j| format!("x{j}")).collect();
    Dataset::new(features, target, names)
}

/// Adds Gaussian noise to `signal` so that `var(signal) / var(noise) = snr`.
/// Returns the noisy target and the noise variance.
pub fn add_noise(signal: &[f64], snr: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "snr must be finite and positive, got {snr}"
        )));
    }
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let noise_var = var / snr;
    let noise = Normal::new(0.0, noise_var.sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((
        signal.iter().map(|s| s + noise.sample(&mut rng)).collect(),
        noise_var,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friedman_is_deterministic() {
        let a = friedman1(50, 1.0, 3).unwrap();
        let b = friedman1(50, 1.0, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_features(), 10);
        assert!(a.rows().flatten().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn noiseless_friedman_matches_mean() {
        let d = friedman1(20, 0.0, 1).unwrap();
        for (i, row) in d.rows().enumerate() {
            assert_eq!(d.target()[i], friedman1_mean(row));
        }
    }

    #[test]
    fn noise_variance_follows_snr() {
        let signal: Vec<f64> = (0..4000).map(|i| (i % 7) as f64).collect();
        let (noisy, nv) = add_noise(&signal, 5.0, 9).unwrap();
        let emp = noisy
            .iter()
            .zip(&signal)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / 4000.0;
        assert!((emp / nv - 1.0).abs() < 0.1);
    }
}
