use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Error, Result};
use crate::linalg::{gemm, RealMatrix, View};
use crate::sketches::FeatureMatrix;

fn check_lambda(lambda: f64) -> Result<()> {
    ensure!(
        lambda > 0.0 && lambda.is_finite(),
        Domain,
        "ridge parameter lambda={lambda} must be positive"
    );
    Ok(())
}

fn solve_spd(mut a: DMatrix<f64>, b: DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Domain("ridge system is not positive definite".into()))?;
    Ok(chol.solve(&b))
}

/// `A Aᵀ` for a row-major `m × k` slice.
fn outer_gram(a: &[f64], m: usize, k: usize) -> DMatrix<f64> {
    let mut out = vec![0.0; m * m];
    gemm(m, k, m, View::new(a, 0, k as isize, 1), View::new(a, 0, 1, k as isize), &mut out, m as isize, 1);
    DMatrix::from_row_slice(m, m, &out)
}

/// `Aᵀ A` for a row-major `m × k` slice.
fn inner_gram(a: &[f64], m: usize, k: usize) -> DMatrix<f64> {
    let mut out = vec![0.0; k * k];
    gemm(k, m, k, View::new(a, 0, 1, k as isize), View::new(a, 0, k as isize, 1), &mut out, k as isize, 1);
    DMatrix::from_row_slice(k, k, &out)
}

/// Ridge weights `w = (F Fᵀ + λI)⁻¹ F t` for features given one point per row
/// (`n × D`). The `n × n` dual system is solved instead when `D > n`.
pub fn krr_fit_rows(features: &RealMatrix, targets: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let (n, dim) = features.shape();
    ensure!(
        targets.len() == n,
        Dimension,
        "{} targets for {n} feature columns",
        targets.len()
    );
    let f = features.as_slice();
    let t = DVector::from_column_slice(targets);
    let fm = DMatrix::from_row_slice(n, dim, f);
    if dim <= n {
        let rhs = fm.transpose() * &t;
        Ok(solve_spd(inner_gram(f, n, dim), rhs, lambda)?.as_slice().to_vec())
    } else {
        let alpha = solve_spd(outer_gram(f, n, dim), t, lambda)?;
        Ok((fm.transpose() * alpha).as_slice().to_vec())
    }
}

pub fn krr_predict_rows(weights: &[f64], features: &RealMatrix) -> Result<Vec<f64>> {
    ensure!(
        weights.len() == features.cols(),
        Dimension,
        "{} weights for feature dimension {}",
        weights.len(),
        features.cols()
    );
    features.matvec(weights)
}

fn real_rows(features: &FeatureMatrix) -> Result<RealMatrix> {
    features.to_point_rows().ok_or_else(|| {
        Error::Argument("ridge regression needs real features (use the ctr field)".into())
    })
}

/// Feature-space ridge regression on sketched features.
pub fn krr_fit(features: &FeatureMatrix, targets: &[f64], lambda: f64) -> Result<Vec<f64>> {
    krr_fit_rows(&real_rows(features)?, targets, lambda)
}

pub fn krr_predict(weights: &[f64], features: &FeatureMatrix) -> Result<Vec<f64>> {
    krr_predict_rows(weights, &real_rows(features)?)
}

/// Exact-kernel baseline: `α = (K + λI)⁻¹ t`.
pub fn krr_exact_fit(k: &RealMatrix, targets: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    ensure!(
        k.rows() == k.cols() && k.rows() == targets.len(),
        Dimension,
        "kernel {:?} and {} targets",
        k.shape(),
        targets.len()
    );
    Ok(solve_spd(k.to_nalgebra(), DVector::from_column_slice(targets), lambda)?
        .as_slice()
        .to_vec())
}

/// Predictions `K_test α` with `K_test` of shape `m × n`.
pub fn krr_exact_predict(alpha: &[f64], k_test: &RealMatrix) -> Result<Vec<f64>> {
    k_test.matvec(alpha)
}

/// Exact polynomial kernel `(xᵀy)^p` between the rows of `a` and `b`.
pub fn polynomial_kernel(a: &RealMatrix, b: &RealMatrix, p: u32) -> Result<RealMatrix> {
    ensure!(a.cols() == b.cols(), Dimension, "kernel inputs of width {} and {}", a.cols(), b.cols());
    let mut k = a.matmul(&b.transpose())?;
    k.as_mut_slice().iter_mut().for_each(|v| *v = v.powi(p as i32));
    Ok(k)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    ensure!(
        pred.len() == truth.len() && !pred.is_empty(),
        Dimension,
        "rmse of {} predictions against {} targets",
        pred.len(),
        truth.len()
    );
    let sse: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketches::explicit_tensor_feature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> RealMatrix {
        RealMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    fn tensor_rows(x: &RealMatrix, p: u32) -> RealMatrix {
        let rows: Vec<Vec<f64>> = (0..x.rows()).map(|i| explicit_tensor_feature(x.row(i), p).unwrap()).collect();
        RealMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn explicit_features_match_exact_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = 2;
        // D = 9 < n (primal) and D = 16 > n (dual).
        for (d, n) in [(3, 12), (4, 10)] {
            let train = random_matrix(&mut rng, n, d);
            let test = random_matrix(&mut rng, 5, d);
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = krr_fit_rows(&tensor_rows(&train, p), &t, 0.1).unwrap();
            let pred = krr_predict_rows(&w, &tensor_rows(&test, p)).unwrap();
            let alpha = krr_exact_fit(&polynomial_kernel(&train, &train, p).unwrap(), &t, 0.1).unwrap();
            let exact = krr_exact_predict(&alpha, &polynomial_kernel(&test, &train, p).unwrap()).unwrap();
            for (a, b) in pred.iter().zip(&exact) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn heavy_ridge_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_matrix(&mut rng, 8, 5);
        let t = vec![1.0; 8];
        let w = krr_fit_rows(&f, &t, 1e9).unwrap();
        let pred = krr_predict_rows(&w, &f).unwrap();
        assert!(pred.iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn lambda_must_be_positive() {
        let f = RealMatrix::identity(3);
        assert!(matches!(krr_fit_rows(&f, &[1.0, 2.0, 3.0], 0.0), Err(Error::Domain(_))));
        assert!(matches!(krr_exact_fit(&f, &[1.0, 2.0, 3.0], -1.0), Err(Error::Domain(_))));
        assert!(matches!(krr_fit_rows(&f, &[1.0], 1.0), Err(Error::Dimension(_))));
    }
}
