//! Closed-form variances, pseudo-variances, variance gaps, moment constants,
//! the dimension estimator for norm preservation and the λ-statistical
//! dimension.
//!
//! All variances are for the estimator `k̂(x, y)` of `(xᵀy)^p` built from
//! `D_rows` i.i.d. rows, so each carries a factor `1/D_rows`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{ensure, Error, Result};
use crate::linalg::RealMatrix;
use crate::randomness::{WeightDist, WeightField};
use crate::sketches::{Family, Field};

/// Sufficient statistics of a pair: `‖x‖²‖y‖²`, `x·y` and `Σ x_i² y_i²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub norm_product: f64,
    pub dot: f64,
    pub sum_sq_products: f64,
    cross: f64,
}

impl PairStats {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        ensure!(
            x.len() == y.len(),
            Dimension,
            "x has length {} but y has length {}",
            x.len(),
            y.len()
        );
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let ny: f64 = y.iter().map(|v| v * v).sum();
        Ok(Self {
            norm_product: nx * ny,
            dot: x.iter().zip(y).map(|(a, b)| a * b).sum(),
            sum_sq_products: x.iter().zip(y).map(|(a, b)| a * a * b * b).sum(),
            cross: {
                let mut prefix = 0.0;
                let mut acc = 0.0;
                for (a, b) in x.iter().zip(y) {
                    acc += a * b * prefix;
                    prefix += a * b;
                }
                2.0 * acc
            },
        })
    }

    /// `a = (x·y)² − Σ x_i² y_i² = 2 Σ_{i<j} x_i y_i x_j y_j`.
    pub fn a(&self) -> f64 {
        self.cross
    }

    fn k2(&self) -> f64 {
        self.dot * self.dot
    }
}

fn q(field: WeightField) -> f64 {
    match field {
        WeightField::Real => 2.0,
        WeightField::Complex => 1.0,
    }
}

fn check_rows(d_rows: usize) -> Result<f64> {
    ensure!(d_rows >= 1, Argument, "D_rows must be at least 1");
    Ok(d_rows as f64)
}

fn check_degree(p: u32) -> Result<i32> {
    ensure!(p >= 1, Argument, "degree p must be at least 1");
    i32::try_from(p).map_err(|_| Error::Argument(format!("degree {p} too large")))
}

/// `E|k̂ − k|²` of the dense Gaussian or Rademacher sketch.
pub fn variance(
    dist: WeightDist,
    field: WeightField,
    x: &[f64],
    y: &[f64],
    p: u32,
    d_rows: usize,
) -> Result<f64> {
    let s = PairStats::new(x, y)?;
    let (p, d) = (check_degree(p)?, check_rows(d_rows)?);
    let inner = match dist {
        WeightDist::Gaussian => s.norm_product + q(field) * s.k2(),
        WeightDist::Rademacher => s.norm_product + q(field) * s.a(),
    };
    Ok((inner.powi(p) - s.k2().powi(p)) / d)
}

/// `E[(k̂_C − k)²]` of the dense complex sketch.
pub fn pseudo_variance(dist: WeightDist, x: &[f64], y: &[f64], p: u32, d_rows: usize) -> Result<f64> {
    let s = PairStats::new(x, y)?;
    let (p, d) = (check_degree(p)?, check_rows(d_rows)?);
    let inner = match dist {
        WeightDist::Gaussian => 2.0 * s.k2(),
        WeightDist::Rademacher => s.k2() + s.a(),
    };
    Ok((inner.powi(p) - s.k2().powi(p)) / d)
}

/// `(variance, pseudo_variance)` of the ProductSRHT sketch with `d_rows` rows
/// per block; `x` and `y` are implicitly zero-padded to `padded_d`. For the
/// real field both entries are the variance.
pub fn variance_product_srht(
    field: WeightField,
    x: &[f64],
    y: &[f64],
    p: u32,
    d_rows: usize,
    padded_d: usize,
) -> Result<(f64, f64)> {
    let s = PairStats::new(x, y)?;
    let (pi, d) = (check_degree(p)?, check_rows(d_rows)?);
    ensure!(
        padded_d.is_power_of_two() && padded_d >= x.len(),
        Argument,
        "padded_d={padded_d} must be a power of two no smaller than d={}",
        x.len()
    );
    let copies = d_rows.div_ceil(padded_d);
    let stacked = (copies * padded_d) as f64;
    let k2p = s.k2().powi(pi);
    let reduction = |one_row: f64| {
        if d_rows == 1 {
            0.0
        } else {
            (1.0 - 1.0 / d) * (k2p - (s.k2() - one_row / (stacked - 1.0)).powi(pi))
        }
    };
    let v1 = (s.norm_product - s.sum_sq_products) + (q(field) - 1.0) * s.a();
    let v = variance(WeightDist::Rademacher, field, x, y, p, d_rows)? - reduction(v1);
    let pv = match field {
        WeightField::Real => v,
        WeightField::Complex => pseudo_variance(WeightDist::Rademacher, x, y, p, d_rows)? - reduction(s.a()),
    };
    Ok((v, pv))
}

fn complex_moments(family: Family, x: &[f64], y: &[f64], p: u32, rows: usize) -> Result<(f64, f64)> {
    match family {
        Family::Gaussian | Family::Rademacher => {
            let dist = if family == Family::Gaussian {
                WeightDist::Gaussian
            } else {
                WeightDist::Rademacher
            };
            Ok((
                variance(dist, WeightField::Complex, x, y, p, rows)?,
                pseudo_variance(dist, x, y, p, rows)?,
            ))
        }
        Family::ProductSrht => variance_product_srht(
            WeightField::Complex,
            x,
            y,
            p,
            rows,
            x.len().max(1).next_power_of_two(),
        ),
        Family::TensorSketch => Err(Error::Argument(
            "no closed-form variance is provided for tensor_sketch".into(),
        )),
    }
}

/// `V[k̂_CtR] = ½(V[k̂_C] + PV[k̂_C])` with `D/2` complex rows.
pub fn ctr_variance(family: Family, x: &[f64], y: &[f64], p: u32, output_dim: usize) -> Result<f64> {
    ensure!(
        output_dim >= 2 && output_dim % 2 == 0,
        Spec,
        "D must be even for ctr (got {output_dim})"
    );
    let (v, pv) = complex_moments(family, x, y, p, output_dim / 2)?;
    Ok(0.5 * (v + pv))
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Real-minus-CtR variance of Rademacher sketches at output dimension `D`,
/// with the `a` of the sign condition.
pub fn variance_gap_rademacher(x: &[f64], y: &[f64], p: u32, output_dim: usize) -> Result<(f64, f64)> {
    let s = PairStats::new(x, y)?;
    check_degree(p)?;
    let d = check_rows(output_dim)?;
    let a = s.a();
    let b = |j: u32| s.norm_product.powi(j as i32) - s.sum_sq_products.powi(j as i32);
    let mut total = 0.0;
    for k in 2..=p {
        for j in 0..k {
            total += binomial(p, k) * binomial(k, j) * b(j) * a.powi((p - j) as i32);
        }
    }
    Ok((total / d, a))
}

/// Real-minus-CtR variance of Gaussian sketches at output dimension `D`.
pub fn variance_gap_gaussian(x: &[f64], y: &[f64], p: u32, output_dim: usize) -> Result<f64> {
    let s = PairStats::new(x, y)?;
    check_degree(p)?;
    let d = check_rows(output_dim)?;
    let total: f64 = (0..p)
        .map(|k| {
            binomial(p, k)
                * (2f64.powi(k as i32) - 1.0)
                * s.k2().powi(k as i32)
                * s.norm_product.powi((p - k) as i32)
        })
        .sum();
    Ok(total / d)
}

/// `C_t` with `E|wᵀa|^t ≤ (C_t ‖a‖₂)^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstant {
    pub t: f64,
    pub field: WeightField,
    pub value: f64,
    pub exact: bool,
}

fn real_gaussian_constant(t: f64) -> f64 {
    2f64.sqrt() * std::f64::consts::PI.powf(-1.0 / (2.0 * t)) * gamma((t + 1.0) / 2.0).powf(1.0 / t)
}

fn complex_gaussian_constant(t: f64) -> f64 {
    gamma(t / 2.0 + 1.0).powf(1.0 / t)
}

pub fn moment_constant(t: f64, field: WeightField, dist: WeightDist) -> Result<MomentConstant> {
    if !(t >= 2.0) || !t.is_finite() {
        return Err(Error::Domain(format!("moment order t={t} must be at least 2")));
    }
    let (value, exact) = match (field, dist) {
        (WeightField::Real, WeightDist::Rademacher) if t <= 2.0 => (1.0, true),
        (WeightField::Real, _) => (real_gaussian_constant(t), true),
        (WeightField::Complex, WeightDist::Gaussian) => (complex_gaussian_constant(t), true),
        (WeightField::Complex, WeightDist::Rademacher) => {
            let a = 2.0 * (t / 2.0).floor();
            if a == t {
                (complex_gaussian_constant(t), true)
            } else {
                let b = a + 2.0;
                let ea = a * (b - t) / (t * (b - a));
                let eb = b * (t - a) / (t * (b - a));
                (
                    complex_gaussian_constant(a).powf(ea) * complex_gaussian_constant(b).powf(eb),
                    false,
                )
            }
        }
    };
    Ok(MomentConstant {
        t,
        field,
        value,
        exact,
    })
}

/// The two terms inside the maximum of the norm-preservation dimension bound.
pub fn recommended_dim_terms(eps: f64, delta: f64, p: u32, field: WeightField, gamma: f64) -> Result<(f64, f64)> {
    let pi = check_degree(p)?;
    ensure!(eps > 0.0 && eps.is_finite(), Domain, "eps={eps} must be positive");
    ensure!(gamma > 0.0 && gamma.is_finite(), Domain, "gamma={gamma} must be positive");
    let limit = (-2.0 * p as f64 * gamma).exp();
    if !(delta > 0.0 && delta < limit) {
        return Err(Error::Domain(format!(
            "delta={delta} must lie in (0, exp(-2 p gamma)) = (0, {limit})"
        )));
    }
    let c4 = moment_constant(4.0, field, WeightDist::Gaussian)?.value;
    let log_term = (1.0 / delta).ln() / (p as f64 * gamma);
    let first = (c4 * (gamma / 2.0).exp()).powi(4 * pi) * log_term / (eps * eps);
    let second = (c4 * c4 * std::f64::consts::E / 2.0 * gamma.exp()).powi(pi) * log_term.powi(pi) / eps;
    Ok((first, second))
}

/// Order-of-magnitude output dimension for `(ε, δ)` norm preservation; `c`
/// stands in for the unspecified absolute constant.
pub fn recommended_dim(eps: f64, delta: f64, p: u32, field: WeightField, c: f64, gamma: f64) -> Result<u64> {
    ensure!(c > 0.0 && c.is_finite(), Domain, "constant c={c} must be positive");
    let (first, second) = recommended_dim_terms(eps, delta, p, field, gamma)?;
    let d = (c * first.max(second)).ceil();
    if !d.is_finite() || d > u64::MAX as f64 {
        return Err(Error::Resource(format!("recommended dimension {d} does not fit in u64")));
    }
    Ok(d as u64)
}

pub(crate) fn check_symmetric(k: &RealMatrix, what: &str) -> Result<()> {
    ensure!(k.rows() == k.cols(), Validation, "{what} must be square, got {:?}", k.shape());
    let scale = k.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    ensure!(k.is_symmetric(1e-8 * scale), Validation, "{what} is not symmetric");
    Ok(())
}

pub(crate) fn symmetric_eigenvalues(k: &RealMatrix) -> Vec<f64> {
    let m = k.to_nalgebra();
    let sym = (&m + m.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// `s_λ(K) = Tr{K (K + λI)^{-1}}`.
pub fn statistical_dimension(k: &RealMatrix, lambda: f64) -> Result<f64> {
    ensure!(lambda >= 0.0 && lambda.is_finite(), Domain, "lambda={lambda} must be non-negative");
    check_symmetric(k, "K")?;
    let eig = symmetric_eigenvalues(k);
    let top = eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    ensure!(
        eig.iter().all(|&l| l >= -1e-8 * top),
        Validation,
        "K is not positive semidefinite (min eigenvalue {:e})",
        eig.iter().cloned().fold(f64::INFINITY, f64::min)
    );
    Ok(eig
        .into_iter()
        .map(|l| l.max(0.0))
        .map(|l| if l == 0.0 { 0.0 } else { l / (l + lambda) })
        .sum())
}

/// Variance summary of one `(family, field, p, D)` query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub family: Family,
    pub field: Field,
    pub p: u32,
    #[serde(rename = "D")]
    pub output_dim: usize,
    /// Variance of the estimator of `field` at output dimension `D`.
    pub variance: f64,
    /// Complex pseudo-variance at `D/2` rows; equals `variance` for real sketches.
    pub pseudo_variance: f64,
    pub ctr_variance: Option<f64>,
    pub a_value: f64,
    pub gap: Option<f64>,
    pub ctr_advantage: Option<bool>,
}

pub fn variance_report(
    family: Family,
    field: Field,
    x: &[f64],
    y: &[f64],
    p: u32,
    output_dim: usize,
) -> Result<VarianceReport> {
    ensure!(
        family != Family::TensorSketch,
        Argument,
        "no closed-form variance is provided for tensor_sketch"
    );
    ensure!(
        field == Field::Real || output_dim % 2 == 0,
        Spec,
        "D must be even for {field}"
    );
    let s = PairStats::new(x, y)?;
    let even = output_dim >= 2 && output_dim % 2 == 0;
    let ctr = if even {
        Some(ctr_variance(family, x, y, p, output_dim)?)
    } else {
        None
    };
    let (variance, pseudo_variance) = match field {
        Field::Real => {
            let v = real_variance(family, x, y, p, output_dim)?;
            (v, v)
        }
        Field::Complex => complex_moments(family, x, y, p, output_dim / 2)?,
        Field::Ctr => (
            ctr.expect("D is even"),
            complex_moments(family, x, y, p, output_dim / 2)?.1,
        ),
    };
    let (gap, ctr_advantage) = match family {
        Family::Gaussian => (Some(variance_gap_gaussian(x, y, p, output_dim)?), None),
        Family::Rademacher => (
            Some(variance_gap_rademacher(x, y, p, output_dim)?.0),
            Some(s.a() >= 0.0),
        ),
        _ => (
            ctr.map(|c| real_variance(family, x, y, p, output_dim).map(|v| v - c)).transpose()?,
            None,
        ),
    };
    Ok(VarianceReport {
        family,
        field,
        p,
        output_dim,
        variance,
        pseudo_variance,
        ctr_variance: ctr,
        a_value: s.a(),
        gap,
        ctr_advantage,
    })
}

/// Variance of the real sketch of `family` with `d_rows` rows.
pub fn real_variance(family: Family, x: &[f64], y: &[f64], p: u32, d_rows: usize) -> Result<f64> {
    match family {
        Family::Gaussian => variance(WeightDist::Gaussian, WeightField::Real, x, y, p, d_rows),
        Family::Rademacher => variance(WeightDist::Rademacher, WeightField::Real, x, y, p, d_rows),
        Family::ProductSrht => Ok(variance_product_srht(
            WeightField::Real,
            x,
            y,
            p,
            d_rows,
            x.len().max(1).next_power_of_two(),
        )?
        .0),
        Family::TensorSketch => Err(Error::Argument(
            "no closed-form variance is provided for tensor_sketch".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const G: WeightDist = WeightDist::Gaussian;
    const R: WeightDist = WeightDist::Rademacher;
    const RE: WeightField = WeightField::Real;
    const CX: WeightField = WeightField::Complex;

    fn random_vec(rng: &mut ChaCha8Rng, d: usize, nonneg: bool) -> Vec<f64> {
        (0..d)
            .map(|_| {
                let v: f64 = rng.random_range(-1.0..1.0);
                if nonneg {
                    v.abs()
                } else {
                    v
                }
            })
            .collect()
    }

    #[test]
    fn variance_examples() {
        let e1 = [1.0, 0.0, 0.0];
        for field in [RE, CX] {
            for p in 1..5 {
                assert_eq!(variance(R, field, &e1, &e1, p, 1).unwrap(), 0.0);
            }
        }
        let u = [0.6, 0.8];
        assert_relative_eq!(variance(G, CX, &u, &u, 1, 1).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(variance(G, RE, &u, &u, 1, 1).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(variance(G, RE, &u, &u, 1, 4).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(variance(G, RE, &u, &e1, 1, 1), Err(Error::Dimension(_))));
        assert!(variance(G, RE, &u, &u, 0, 1).is_err());
        assert!(variance(G, RE, &u, &u, 1, 0).is_err());
    }

    #[test]
    fn pseudo_variance_examples() {
        assert_eq!(pseudo_variance(G, &[1.0, 0.0], &[0.0, 1.0], 3, 1).unwrap(), 0.0);
        assert_eq!(pseudo_variance(R, &[1.0, 0.0], &[1.0, 0.0], 1, 1).unwrap(), 0.0);
        let u = [0.6, 0.8];
        assert_relative_eq!(pseudo_variance(G, &u, &u, 2, 1).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn srht_variance_examples() {
        let e1 = [1.0, 0.0, 0.0, 0.0];
        for field in [RE, CX] {
            for p in 1..4 {
                let (v, pv) = variance_product_srht(field, &e1, &e1, p, 4, 4).unwrap();
                assert!(v.abs() < 1e-15 && pv.abs() < 1e-15);
            }
        }
        // One row reduces to the Rademacher sketch.
        let x = [0.3, -0.2, 0.9];
        let y = [0.5, 0.5, -0.1];
        let (v, _) = variance_product_srht(RE, &x, &y, 2, 1, 4).unwrap();
        assert_eq!(v, variance(R, RE, &x, &y, 2, 1).unwrap());
        // p = 1, D = d: a full Hadamard block is exact.
        let (v, pv) = variance_product_srht(CX, &x, &y, 1, 4, 4).unwrap();
        assert!(v.abs() < 1e-14 && pv.abs() < 1e-14, "{v} {pv}");
        let (v, _) = variance_product_srht(RE, &x, &y, 1, 4, 4).unwrap();
        assert!(v.abs() < 1e-14);
        assert!(variance_product_srht(RE, &x, &y, 1, 4, 3).is_err());
        assert!(variance_product_srht(RE, &x, &y, 1, 4, 2).is_err());
    }

    #[test]
    fn srht_variance_unchanged_by_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 5, false);
            let y = random_vec(&mut rng, 5, false);
            let mut xp = x.clone();
            let mut yp = y.clone();
            xp.resize(8, 0.0);
            yp.resize(8, 0.0);
            for field in [RE, CX] {
                let a = variance_product_srht(field, &x, &y, 3, 12, 8).unwrap();
                let b = variance_product_srht(field, &xp, &yp, 3, 12, 8).unwrap();
                assert_relative_eq!(a.0, b.0, max_relative = 1e-12);
                assert_relative_eq!(a.1, b.1, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn srht_dominated_by_rademacher_for_odd_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = rng.random_range(1..9);
            let x = random_vec(&mut rng, d, true);
            let y = random_vec(&mut rng, d, true);
            let pd = d.next_power_of_two();
            for p in [1, 3, 5] {
                for rows in [1, pd, 2 * pd, 3 * pd + 1] {
                    for field in [RE, CX] {
                        let (v, _) = variance_product_srht(field, &x, &y, p, rows, pd).unwrap();
                        let r = variance(R, field, &x, &y, p, rows).unwrap();
                        assert!(v <= r * (1.0 + 1e-12) + 1e-15, "{v} > {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn ctr_variance_examples() {
        let u = [0.6, 0.8];
        assert_relative_eq!(ctr_variance(Family::Gaussian, &u, &u, 1, 2).unwrap(), 1.0, epsilon = 1e-15);
        let e1 = [1.0, 0.0];
        for family in [Family::Rademacher, Family::ProductSrht] {
            assert!(ctr_variance(family, &e1, &e1, 3, 8).unwrap().abs() < 1e-15);
        }
        assert!(matches!(ctr_variance(Family::Gaussian, &u, &u, 1, 3), Err(Error::Spec(_))));
        assert!(ctr_variance(Family::TensorSketch, &u, &u, 1, 4).is_err());
    }

    #[test]
    fn gap_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let d = rng.random_range(1..9);
            let x = random_vec(&mut rng, d, false);
            let y = random_vec(&mut rng, d, false);
            for p in 1..=5 {
                let dim = 8;
                let direct = variance(G, RE, &x, &y, p, dim).unwrap()
                    - ctr_variance(Family::Gaussian, &x, &y, p, dim).unwrap();
                let gap = variance_gap_gaussian(&x, &y, p, dim).unwrap();
                assert_relative_eq!(gap, direct, max_relative = 1e-10, epsilon = 1e-15);
                assert!(gap >= 0.0);

                let direct = variance(R, RE, &x, &y, p, dim).unwrap()
                    - ctr_variance(Family::Rademacher, &x, &y, p, dim).unwrap();
                let (gap, a) = variance_gap_rademacher(&x, &y, p, dim).unwrap();
                assert_relative_eq!(gap, direct, max_relative = 1e-10, epsilon = 1e-15);
                assert_relative_eq!(a, PairStats::new(&x, &y).unwrap().a());
            }
        }
    }

    #[test]
    fn gap_examples() {
        let x = [0.3, 0.4];
        let y = [-0.2, 0.9];
        assert_eq!(variance_gap_rademacher(&x, &y, 1, 4).unwrap().0, 0.0);
        assert_eq!(variance_gap_gaussian(&x, &y, 1, 4).unwrap(), 0.0);
        assert_eq!(variance_gap_rademacher(&[1.0, 0.0], &[1.0, 0.0], 3, 4).unwrap(), (0.0, 0.0));
        let u = [0.6, 0.8];
        assert_relative_eq!(variance_gap_gaussian(&u, &u, 2, 1).unwrap(), 2.0, epsilon = 1e-14);
        for p in 1..6 {
            let parallel = 3f64.powi(p as i32) - 2f64.powi(p as i32 + 1) + 1.0;
            assert_relative_eq!(variance_gap_gaussian(&u, &u, p, 1).unwrap(), parallel, max_relative = 1e-12);
        }
    }

    #[test]
    fn moment_constant_anchors() {
        let r4 = moment_constant(4.0, RE, G).unwrap().value;
        let c4 = moment_constant(4.0, CX, G).unwrap().value;
        assert_relative_eq!(r4, 1.316074, epsilon = 1e-6);
        assert_relative_eq!(c4, 1.189207, epsilon = 1e-6);
        assert_relative_eq!(r4.powi(4), 3.0, epsilon = 1e-12);
        assert_relative_eq!(c4.powi(4), 2.0, epsilon = 1e-12);
        for field in [RE, CX] {
            for dist in [G, R] {
                assert_relative_eq!(moment_constant(2.0, field, dist).unwrap().value, 1.0, epsilon = 1e-14);
            }
        }
        let odd = moment_constant(3.0, CX, R).unwrap();
        assert!(!odd.exact);
        assert!(moment_constant(6.0, CX, R).unwrap().exact);
        assert!(matches!(moment_constant(1.5, RE, G), Err(Error::Domain(_))));
    }

    #[test]
    fn moment_constant_ordering() {
        let mut prev = f64::INFINITY;
        for i in 0..=28 {
            let t = 2.0 + 0.5 * i as f64;
            for dist in [G, R] {
                let r = moment_constant(t, RE, dist).unwrap().value;
                let c = moment_constant(t, CX, dist).unwrap().value;
                assert!(c <= r + 1e-15, "t={t}: {c} > {r}");
            }
            let ratio = moment_constant(t, RE, G).unwrap().value / t.sqrt();
            assert!(ratio <= prev + 1e-15);
            prev = ratio;
        }
    }

    #[test]
    fn recommended_dim_properties() {
        let p = 4;
        let g = 1.0 / p as f64;
        let delta = 1e-3;
        let r = recommended_dim_terms(0.1, delta, p, RE, g).unwrap().0;
        let c = recommended_dim_terms(0.1, delta, p, CX, g).unwrap().0;
        assert_relative_eq!(r / c, 5.0625, max_relative = 1e-12);
        let half = recommended_dim_terms(0.05, delta, p, RE, g).unwrap().0;
        assert_relative_eq!(half / r, 4.0, max_relative = 1e-12);
        for p in 1..6 {
            let g = 1.0 / p as f64;
            assert!(recommended_dim(0.1, 0.01, p, CX, 1.0, g).unwrap() <= recommended_dim(0.1, 0.01, p, RE, 1.0, g).unwrap());
        }
        assert!(matches!(recommended_dim(0.1, 0.5, 2, RE, 1.0, 0.5), Err(Error::Domain(_))));
        assert!(recommended_dim(0.0, 0.01, 2, RE, 1.0, 0.5).is_err());
        assert!(recommended_dim(0.1, 0.01, 2, RE, 1.0, 0.0).is_err());
    }

    #[test]
    fn statistical_dimension_examples() {
        assert_relative_eq!(statistical_dimension(&RealMatrix::identity(3), 1.0).unwrap(), 1.5, epsilon = 1e-12);
        let k = RealMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_relative_eq!(statistical_dimension(&k, 0.0).unwrap(), 2.0, epsilon = 1e-12);
        let k = RealMatrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(statistical_dimension(&k, 1.0).unwrap(), 1.3, epsilon = 1e-12);
        let asym = RealMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(statistical_dimension(&asym, 1.0), Err(Error::Validation(_))));
        let indef = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(statistical_dimension(&indef, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn report_fields() {
        let e1 = [1.0, 0.0];
        let r = variance_report(Family::Rademacher, Field::Ctr, &e1, &e1, 3, 8).unwrap();
        assert_eq!((r.variance, r.pseudo_variance, r.ctr_variance, r.a_value), (0.0, 0.0, Some(0.0), 0.0));
        assert_eq!(r.ctr_advantage, Some(true));
        let json = serde_json::to_string(&r).unwrap();
        let back: VarianceReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let r = variance_report(Family::Gaussian, Field::Real, &[0.3, 0.1], &[0.2, -0.9], 2, 5).unwrap();
        assert_eq!(r.ctr_variance, None);
        assert!(r.gap.unwrap() >= 0.0);
        assert!(variance_report(Family::Gaussian, Field::Ctr, &e1, &e1, 2, 5).is_err());
    }
}
