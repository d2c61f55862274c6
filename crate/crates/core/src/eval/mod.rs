//! Metrics, Monte Carlo campaigns, ridge regression, data handling, timing
//! and the configurable experiment runner.

mod data;
mod experiment;
mod krr;
mod montecarlo;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::RealMatrix;
use crate::randomness::{derive_stream, StreamKey};
use crate::sketches::{fit, Family, Field, SketchSpec};
use crate::theory::{check_symmetric, symmetric_eigenvalues};

pub use data::{
    load_csv, preprocess, read_csv, synthetic_dataset, Dataset, Preprocess, Preprocessor, SyntheticSpec,
};
pub use experiment::{
    aggregate, load_config, run_experiment, test_vector, write_aggregate_csv, AggregateRow, DataConfig,
    ExperimentConfig, MethodConfig, MetricKind, VectorConfig, VectorKind,
};
pub use krr::{
    krr_exact_fit, krr_exact_predict, krr_fit, krr_fit_rows, krr_predict, krr_predict_rows, polynomial_kernel,
    rmse,
};
pub use montecarlo::{
    empirical_error_probability, error_fraction, monte_carlo_variance, norm_preservation_stats,
    norm_stats_from_samples, run_trials, sample_stats, squared_norm_samples, trial_seed, MonteCarloStats,
    NormStats, MIN_VARIANCE_TRIALS,
};

/// One measured value of an experiment cell for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: String,
    pub family: Family,
    pub field: Field,
    pub p: u32,
    #[serde(rename = "D")]
    pub output_dim: usize,
    pub seed: u64,
    pub metric: String,
    pub value: Option<f64>,
    pub wall_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentResult {
    pub fn new(spec: &SketchSpec, metric: &str, value: f64, wall_ns: u64) -> Self {
        Self {
            method: spec.method_id(),
            family: spec.family,
            field: spec.field,
            p: spec.degree,
            output_dim: spec.output_dim,
            seed: spec.seed,
            metric: metric.to_owned(),
            value: Some(value),
            wall_ns,
            error: None,
        }
    }

    pub fn failed(spec: &SketchSpec, err: &Error) -> Self {
        Self {
            value: None,
            error: Some(err.to_string()),
            ..Self::new(spec, "error", 0.0, 0)
        }
    }
}

/// `‖K̂ − K‖_F / ‖K‖_F`.
pub fn relative_frobenius_error(k_hat: &RealMatrix, k: &RealMatrix) -> Result<f64> {
    ensure!(
        k_hat.shape() == k.shape(),
        Dimension,
        "shapes {:?} and {:?} differ",
        k_hat.shape(),
        k.shape()
    );
    let denom = k.frobenius_norm();
    ensure!(denom > 0.0, Domain, "reference kernel has zero Frobenius norm");
    let num = k_hat
        .as_slice()
        .iter()
        .zip(k.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Smallest `ε` with `(1−ε)(K+λI) ⪯ K̂+λI ⪯ (1+ε)(K+λI)`.
pub fn spectral_sandwich(k_hat: &RealMatrix, k: &RealMatrix, lambda: f64) -> Result<f64> {
    ensure!(lambda >= 0.0 && lambda.is_finite(), Domain, "lambda={lambda} must be non-negative");
    ensure!(
        k_hat.shape() == k.shape(),
        Dimension,
        "shapes {:?} and {:?} differ",
        k_hat.shape(),
        k.shape()
    );
    check_symmetric(k, "K")?;
    check_symmetric(k_hat, "K_hat")?;
    let n = k.rows();
    let shift = |m: &RealMatrix| {
        let mut a = m.to_nalgebra();
        let a_t = a.transpose();
        a = (a + a_t) * 0.5;
        for i in 0..n {
            a[(i, i)] += lambda;
        }
        a
    };
    let a = shift(k);
    let eig = nalgebra::SymmetricEigen::new(a);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure!(
        min > 1e-12 * top.max(f64::MIN_POSITIVE),
        Domain,
        "K + lambda I is not positive definite (min eigenvalue {min:e})"
    );
    let inv_sqrt = nalgebra::DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let m = &w * shift(k_hat) * &w;
    let mu = symmetric_eigenvalues(&RealMatrix::from_nalgebra(&m));
    let lo = mu.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((1.0 - lo).max(hi - 1.0).max(0.0))
}

/// Uniform `[-1, 1)` benchmark inputs.
pub fn random_inputs(n: usize, d: usize, seed: u64) -> RealMatrix {
    let mut s = derive_stream(&StreamKey::new(seed).child("inputs", 0));
    RealMatrix::from_fn(n, d, |_, _| 2.0 * s.uniform() - 1.0)
}

fn median(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    v[v.len() / 2]
}

/// Median wall-clock time of `transform` over `repeats` runs, in nanoseconds.
pub fn time_transform(spec: &SketchSpec, x: &RealMatrix, repeats: usize) -> Result<u64> {
    ensure!(repeats >= 1, Argument, "at least one repeat is required");
    let state = fit(spec, x.cols())?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let f = state.transform(x)?;
        times.push(start.elapsed().as_nanos() as u64);
        std::hint::black_box(f);
    }
    Ok(median(times))
}

/// Median transform time of every spec at every output dimension in `dims`
/// on `n` random inputs of dimension `d`.
pub fn timing_benchmark(
    specs: &[SketchSpec],
    d: usize,
    dims: &[usize],
    n: usize,
    repeats: usize,
) -> Result<Vec<ExperimentResult>> {
    let x = random_inputs(n, d, 0);
    let mut out = Vec::new();
    for spec in specs {
        for &dim in dims {
            let s = SketchSpec {
                output_dim: dim,
                ..*spec
            };
            let ns = time_transform(&s, &x, repeats)?;
            out.push(ExperimentResult::new(&s, "transform_ns", ns as f64, ns));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frobenius_examples() {
        let k = RealMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(relative_frobenius_error(&k, &k).unwrap(), 0.0);
        let mut k2 = k.clone();
        k2.scale(2.0);
        assert_relative_eq!(relative_frobenius_error(&k2, &k).unwrap(), 1.0, epsilon = 1e-15);
        let e = RealMatrix::from_rows(&[vec![0.1, -0.2], vec![0.0, 0.3]]).unwrap();
        let mut kh = k.clone();
        kh.as_mut_slice().iter_mut().zip(e.as_slice()).for_each(|(a, b)| *a += b);
        let expected = (0.01f64 + 0.04 + 0.09).sqrt() / 15f64.sqrt();
        assert_relative_eq!(relative_frobenius_error(&kh, &k).unwrap(), expected, max_relative = 1e-14);
        assert!(matches!(relative_frobenius_error(&k, &RealMatrix::zeros(2, 2)), Err(Error::Domain(_))));
    }

    #[test]
    fn sandwich_examples() {
        let k = RealMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert!(spectral_sandwich(&k, &k, 0.1).unwrap() < 1e-12);
        let mut k2 = k.clone();
        k2.scale(1.25);
        assert_relative_eq!(spectral_sandwich(&k2, &k, 0.0).unwrap(), 0.25, epsilon = 1e-12);
        let singular = RealMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(spectral_sandwich(&k, &singular, 0.0), Err(Error::Domain(_))));
        assert!(spectral_sandwich(&k, &singular, 0.5).is_ok());
    }

    #[test]
    fn timing_reports_every_cell() {
        let specs = [
            SketchSpec::new(Family::Rademacher, Field::Real, 2, 8, 0),
            SketchSpec::new(Family::ProductSrht, Field::Ctr, 2, 8, 0),
            SketchSpec::new(Family::TensorSketch, Field::Real, 2, 8, 0),
        ];
        let res = timing_benchmark(&specs, 16, &[16, 32], 10, 3).unwrap();
        assert_eq!(res.len(), 6);
        assert!(res.iter().all(|r| r.metric == "transform_ns" && r.value.unwrap() > 0.0));
    }
}
