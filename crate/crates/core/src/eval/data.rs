use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::RealMatrix;
use crate::randomness::{derive_stream, StreamKey};
use crate::sketches::homogenize;

/// A preprocessing step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    Center,
    UnitNormalize,
    MinMax,
    Homogenize { gamma: f64, nu: f64 },
}

/// Data points as rows of `x`, optional labels and the applied steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: RealMatrix,
    pub labels: Option<Vec<f64>>,
    pub preprocessing: Vec<Preprocess>,
}

impl Dataset {
    pub fn new(x: RealMatrix, labels: Option<Vec<f64>>) -> Result<Self> {
        if let Some(l) = &labels {
            ensure!(
                l.len() == x.rows(),
                Dimension,
                "{} labels for {} rows",
                l.len(),
                x.rows()
            );
        }
        Ok(Self {
            x,
            labels,
            preprocessing: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Rows `idx` of the dataset, keeping labels and applied steps.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let d = self.dim();
        let x = RealMatrix::from_fn(idx.len(), d, |i, j| self.x.get(idx[i], j));
        Dataset {
            x,
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            preprocessing: self.preprocessing.clone(),
        }
    }

    /// First `n_train` rows and the rest.
    pub fn split(&self, n_train: usize) -> Result<(Dataset, Dataset)> {
        ensure!(n_train <= self.len(), Argument, "cannot take {n_train} of {} rows", self.len());
        let train: Vec<usize> = (0..n_train).collect();
        let test: Vec<usize> = (n_train..self.len()).collect();
        Ok((self.select(&train), self.select(&test)))
    }
}

/// Reads a rectangular numeric CSV without a header; `#` lines are skipped.
/// With `label_last` the final column becomes the label vector.
pub fn load_csv(path: impl AsRef<Path>, label_last: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_csv(file, label_last)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_last: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        let parsed = rec
            .iter()
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    reason: format!("non-numeric cell {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = parsed.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                reason: format!("non-finite value {bad}"),
            });
        }
        if label_last {
            let (feat, label) = parsed.split_at(parsed.len() - 1);
            values.extend_from_slice(feat);
            labels.push(label[0]);
        } else {
            values.extend(parsed);
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    let d = if label_last { width.saturating_sub(1) } else { width };
    ensure!(rows > 0, Validation, "CSV contains no data rows");
    ensure!(d > 0, Validation, "CSV contains no feature columns");
    Dataset::new(
        RealMatrix::from_vec(rows, d, values)?,
        label_last.then_some(labels),
    )
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Center(Vec<f64>),
    UnitNormalize,
    MinMax { min: Vec<f64>, max: Vec<f64> },
    Homogenize { gamma: f64, nu: f64 },
}

/// Preprocessing steps with statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    steps: Vec<Fitted>,
}

fn column_stats(x: &RealMatrix) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = x.cols();
    let mut mean = vec![0.0; d];
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for i in 0..x.rows() {
        for (j, &v) in x.row(i).iter().enumerate() {
            mean[j] += v;
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    let n = x.rows().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    (mean, min, max)
}

fn apply_step(step: &Fitted, x: &RealMatrix) -> Result<RealMatrix> {
    let mut out = x.clone();
    match step {
        Fitted::Center(mean) => {
            for i in 0..out.rows() {
                out.row_mut(i).iter_mut().zip(mean).for_each(|(v, m)| *v -= m);
            }
        }
        Fitted::UnitNormalize => {
            for i in 0..out.rows() {
                let row = out.row_mut(i);
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
        }
        Fitted::MinMax { min, max } => {
            for i in 0..out.rows() {
                for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                    let range = max[j] - min[j];
                    *v = if range > 0.0 {
                        ((*v - min[j]) / range).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                }
            }
        }
        Fitted::Homogenize { gamma, nu } => out = homogenize(x, *gamma, *nu)?,
    }
    Ok(out)
}

impl Preprocessor {
    /// Fits every step in order on `train`, each on the output of the previous.
    pub fn fit(steps: &[Preprocess], train: &Dataset) -> Result<Self> {
        let mut x = train.x.clone();
        let mut fitted = Vec::with_capacity(steps.len());
        for step in steps {
            let f = match *step {
                Preprocess::Center => Fitted::Center(column_stats(&x).0),
                Preprocess::UnitNormalize => Fitted::UnitNormalize,
                Preprocess::MinMax => {
                    let (_, min, max) = column_stats(&x);
                    Fitted::MinMax { min, max }
                }
                Preprocess::Homogenize { gamma, nu } => {
                    ensure!(
                        gamma >= 0.0 && nu >= 0.0,
                        Argument,
                        "homogenize needs gamma, nu >= 0 (gamma={gamma}, nu={nu})"
                    );
                    Fitted::Homogenize { gamma, nu }
                }
            };
            x = apply_step(&f, &x)?;
            fitted.push(f);
        }
        Ok(Self { steps: fitted })
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut x = ds.x.clone();
        let mut applied = ds.preprocessing.clone();
        for f in &self.steps {
            x = apply_step(f, &x)?;
            applied.push(match f {
                Fitted::Center(_) => Preprocess::Center,
                Fitted::UnitNormalize => Preprocess::UnitNormalize,
                Fitted::MinMax { .. } => Preprocess::MinMax,
                Fitted::Homogenize { gamma, nu } => Preprocess::Homogenize {
                    gamma: *gamma,
                    nu: *nu,
                },
            });
        }
        Ok(Dataset {
            x,
            labels: ds.labels.clone(),
            preprocessing: applied,
        })
    }
}

/// Fits `steps` on `ds` and applies them to it.
pub fn preprocess(ds: &Dataset, steps: &[Preprocess]) -> Result<Dataset> {
    Preprocessor::fit(steps, ds)?.apply(ds)
}

/// Synthetic data set description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    #[serde(default = "default_components")]
    pub components: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub nonnegative: bool,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_degree")]
    pub target_degree: u32,
}

fn default_components() -> usize {
    4
}

fn default_true() -> bool {
    true
}

fn default_noise() -> f64 {
    0.05
}

fn default_degree() -> u32 {
    3
}

/// Gaussian mixture with unit-normalized rows (absolute values when
/// `nonnegative`) and regression targets `Σ_m β_m (xᵀc_m)^q + noise`.
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    ensure!(spec.n >= 1 && spec.d >= 1, Argument, "synthetic data needs n, d >= 1");
    ensure!(spec.components >= 1, Argument, "synthetic data needs at least one component");
    let root = StreamKey::new(spec.seed);
    let mut cs = derive_stream(&root.child("centers", 0));
    let centers: Vec<Vec<f64>> = (0..spec.components)
        .map(|_| (0..spec.d).map(|_| cs.standard_normal()).collect())
        .collect();
    let betas: Vec<f64> = (0..spec.components).map(|_| cs.standard_normal()).collect();
    let mut ps = derive_stream(&root.child("points", 0));
    let mut x = RealMatrix::zeros(spec.n, spec.d);
    for i in 0..spec.n {
        let c = &centers[ps.below(spec.components)];
        let row = x.row_mut(i);
        for (v, &m) in row.iter_mut().zip(c) {
            *v = m + 0.5 * ps.standard_normal();
            if spec.nonnegative {
                *v = v.abs();
            }
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let unit_centers: Vec<Vec<f64>> = centers
        .iter()
        .map(|c| {
            let c: Vec<f64> = c.iter().map(|v| if spec.nonnegative { v.abs() } else { *v }).collect();
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            c.iter().map(|v| v / n).collect()
        })
        .collect();
    let mut ns = derive_stream(&root.child("noise", 0));
    let labels = (0..spec.n)
        .map(|i| {
            let row = x.row(i);
            let signal: f64 = unit_centers
                .iter()
                .zip(&betas)
                .map(|(c, b)| b * row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>().powi(spec.target_degree as i32))
                .sum();
            signal + spec.noise * ns.standard_normal()
        })
        .collect();
    let mut ds = Dataset::new(x, Some(labels))?;
    ds.preprocessing.push(Preprocess::UnitNormalize);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csv_parsing() {
        let ds = read_csv("# comment\n1,2,3\n4,5,6\n".as_bytes(), true).unwrap();
        assert_eq!(ds.x.shape(), (2, 2));
        assert_eq!(ds.labels, Some(vec![3.0, 6.0]));
        let ds = read_csv("1,2,3\n4,5,6\n".as_bytes(), false).unwrap();
        assert_eq!(ds.x.shape(), (2, 3));
        assert!(ds.labels.is_none());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match read_csv("1,2\n3,4\n5\n".as_bytes(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_csv("1,2\nx,4\n".as_bytes(), false) {
            Err(Error::Parse { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("non-numeric"));
            }
            other => panic!("{other:?}"),
        }
        assert!(read_csv("".as_bytes(), false).is_err());
    }

    #[test]
    fn unit_normalize_rows() {
        let x = RealMatrix::from_rows(&[vec![3.0, 4.0], vec![1e-3, 2e5], vec![0.0, 0.0]]).unwrap();
        let ds = preprocess(&Dataset::new(x, None).unwrap(), &[Preprocess::UnitNormalize]).unwrap();
        for i in 0..2 {
            let n: f64 = ds.x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-12);
        }
        assert_eq!(ds.x.row(2), &[0.0, 0.0]);
        assert_eq!(ds.preprocessing, vec![Preprocess::UnitNormalize]);
    }

    #[test]
    fn min_max_and_constant_columns() {
        let x = RealMatrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![2.0, 5.0]]).unwrap();
        let ds = preprocess(&Dataset::new(x, None).unwrap(), &[Preprocess::MinMax]).unwrap();
        assert_eq!(ds.x.as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn train_statistics_are_reused() {
        let train = Dataset::new(RealMatrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap(), None).unwrap();
        let test = Dataset::new(RealMatrix::from_rows(&[vec![1.0], vec![4.0]]).unwrap(), None).unwrap();
        let pre = Preprocessor::fit(&[Preprocess::Center], &train).unwrap();
        assert_eq!(pre.apply(&test).unwrap().x.as_slice(), &[0.0, 3.0]);
        let pre = Preprocessor::fit(&[Preprocess::MinMax], &train).unwrap();
        assert_eq!(pre.apply(&test).unwrap().x.as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn homogenize_step_reproduces_shifted_kernel() {
        let a: f64 = 2.0;
        let x = RealMatrix::from_rows(&[vec![0.6, 0.8], vec![0.0, 1.0]]).unwrap();
        let ds = preprocess(
            &Dataset::new(x, None).unwrap(),
            &[
                Preprocess::UnitNormalize,
                Preprocess::Homogenize {
                    gamma: 2.0 / (a * a),
                    nu: 1.0 - 2.0 / (a * a),
                },
            ],
        )
        .unwrap();
        let dot: f64 = ds.x.row(0).iter().zip(ds.x.row(1)).map(|(u, v)| u * v).sum();
        for p in 1..5 {
            assert_relative_eq!(dot.powi(p), ((0.8 + 1.0) / 2.0f64).powi(p), max_relative = 1e-14);
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_normalized() {
        let spec = SyntheticSpec {
            n: 50,
            d: 8,
            components: 3,
            seed: 9,
            nonnegative: true,
            noise: 0.1,
            target_degree: 3,
        };
        let a = synthetic_dataset(&spec).unwrap();
        assert_eq!(a, synthetic_dataset(&spec).unwrap());
        for i in 0..50 {
            let n: f64 = a.x.row(i).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
            assert!(a.x.row(i).iter().all(|&v| v >= 0.0));
        }
        assert_ne!(a, synthetic_dataset(&SyntheticSpec { seed: 10, ..spec }).unwrap());
    }
}
