use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::randomness::{derive_stream, StreamKey};
use crate::sketches::{fit, SketchSpec};

/// Smallest trial count accepted by [`monte_carlo_variance`].
pub const MIN_VARIANCE_TRIALS: usize = 10_000;

/// Seed of trial `t` of a campaign rooted at `base`.
pub fn trial_seed(base: u64, t: u64) -> u64 {
    derive_stream(&StreamKey::new(base).child("trial", t)).next_u64()
}

/// Runs `f(spec_t)` for every trial with `spec_t` reseeded per trial, in
/// trial order.
pub fn run_trials<T, F>(spec: &SketchSpec, trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SketchSpec) -> Result<T> + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|t| f(&spec.with_seed(trial_seed(spec.seed, t))))
        .collect()
}

/// Sample moments of a complex (or real) estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub trials: usize,
    pub mean: Complex64,
    /// `mean |z − z̄|²`.
    pub variance: f64,
    /// `mean (z − z̄)²`.
    pub pseudo_variance: Complex64,
    pub se_mean: f64,
    pub se_variance: f64,
    /// Standard error of the real part of `pseudo_variance`.
    pub se_pseudo_variance: f64,
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Moments of `samples` with standard errors from fourth-moment statistics.
pub fn sample_stats(samples: &[Complex64]) -> MonteCarloStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    let dev = samples.iter().map(|z| z - mean);
    let (variance, se_variance) = mean_and_se(dev.clone().map(|e| e.norm_sqr()), n);
    let (pv_re, se_pseudo_variance) = mean_and_se(dev.clone().map(|e| (e * e).re), n);
    let pv_im = dev.map(|e| (e * e).im).sum::<f64>() / n;
    // Bessel correction for the estimated mean.
    let bessel = n / (n - 1.0);
    MonteCarloStats {
        trials: samples.len(),
        mean,
        variance: variance * bessel,
        pseudo_variance: Complex64::new(pv_re, pv_im) * bessel,
        se_mean: (variance * bessel / n).sqrt(),
        se_variance: se_variance * bessel,
        se_pseudo_variance: se_pseudo_variance * bessel,
    }
}

/// Monte Carlo moments of `k̂(x, y)` over independently fitted sketches.
pub fn monte_carlo_variance(spec: &SketchSpec, x: &[f64], y: &[f64], trials: usize) -> Result<MonteCarloStats> {
    ensure!(
        trials >= MIN_VARIANCE_TRIALS,
        Argument,
        "monte_carlo_variance needs at least {MIN_VARIANCE_TRIALS} trials, got {trials}"
    );
    spec.validate()?;
    let samples = run_trials(spec, trials, |s| fit(s, x.len())?.estimate_pair(x, y))?;
    Ok(sample_stats(&samples))
}

/// `‖Φ(x)‖²` for every trial.
pub fn squared_norm_samples(spec: &SketchSpec, x: &[f64], trials: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    run_trials(spec, trials, |s| fit(s, x.len())?.squared_norm(x))
}

/// Fraction of `norms` with `|s − target| ≥ eps·target`.
pub fn error_fraction(norms: &[f64], target: f64, eps: f64) -> f64 {
    let hits = norms.iter().filter(|&&s| (s - target).abs() >= eps * target).count();
    hits as f64 / norms.len().max(1) as f64
}

/// Empirical `Pr{|‖Φ(x)‖² − ‖x‖^{2p}| ≥ ε‖x‖^{2p}}`.
pub fn empirical_error_probability(spec: &SketchSpec, x: &[f64], eps: f64, trials: usize) -> Result<f64> {
    ensure!(trials >= 1, Argument, "at least one trial is required");
    ensure!(eps >= 0.0, Argument, "eps={eps} must be non-negative");
    let target = x.iter().map(|v| v * v).sum::<f64>().powi(spec.degree as i32);
    Ok(error_fraction(&squared_norm_samples(spec, x, trials)?, target, eps))
}

/// Mean absolute norm error and sample variance of `‖Φ(x)‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub trials: usize,
    pub mean_abs_error: f64,
    pub variance: f64,
    pub se_mean_abs_error: f64,
    pub se_variance: f64,
}

pub fn norm_stats_from_samples(norms: &[f64], target: f64) -> NormStats {
    let n = norms.len() as f64;
    let (mean_abs_error, se_mean_abs_error) = mean_and_se(norms.iter().map(|s| (s - target).abs()), n);
    let stats = sample_stats(&norms.iter().map(|&s| Complex64::new(s, 0.0)).collect::<Vec<_>>());
    NormStats {
        trials: norms.len(),
        mean_abs_error,
        variance: stats.variance,
        se_mean_abs_error,
        se_variance: stats.se_variance,
    }
}

pub fn norm_preservation_stats(spec: &SketchSpec, x: &[f64], trials: usize) -> Result<NormStats> {
    ensure!(trials >= 2, Argument, "at least two trials are required");
    let target = x.iter().map(|v| v * v).sum::<f64>().powi(spec.degree as i32);
    Ok(norm_stats_from_samples(&squared_norm_samples(spec, x, trials)?, target))
}
