use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{load_csv, synthetic_dataset, Dataset, Preprocess, Preprocessor, SyntheticSpec};
use super::krr::{krr_fit, krr_predict, polynomial_kernel, rmse};
use super::montecarlo::{empirical_error_probability, norm_preservation_stats};
use super::{relative_frobenius_error, time_transform, ExperimentResult};
use crate::error::{ensure, Error, Result};
use crate::linalg::RealMatrix;
use crate::sketches::{estimate_gram, fit, Family, Field, SketchSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    RelativeFrobeniusError,
    KrrRmse,
    NormError,
    ErrorProbability,
    TransformTime,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::RelativeFrobeniusError => "relative_frobenius_error",
            MetricKind::KrrRmse => "krr_rmse",
            MetricKind::NormError => "norm_error",
            MetricKind::ErrorProbability => "error_probability",
            MetricKind::TransformTime => "transform_ns",
        }
    }

    fn needs_data(&self) -> bool {
        !matches!(self, MetricKind::NormError | MetricKind::ErrorProbability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub family: Family,
    pub field: Field,
}

/// Data source: a CSV path or a synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub label_last: bool,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    /// `(1, …, 1)/√d`.
    Flat,
    /// `(√d, √d, 1, …, 1)`, normalized.
    Spiky,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorConfig {
    #[serde(default)]
    pub kind: Option<VectorKind>,
    #[serde(default)]
    pub d: usize,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

/// Unit-norm flat or spiky test vector of dimension `d`.
pub fn test_vector(kind: VectorKind, d: usize) -> Vec<f64> {
    let mut x = vec![1.0; d];
    if kind == VectorKind::Spiky {
        let s = (d as f64).sqrt();
        x.iter_mut().take(2).for_each(|v| *v = s);
    }
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter().map(|v| v / n).collect()
}

impl VectorConfig {
    fn resolve(&self) -> Result<Vec<f64>> {
        match (&self.values, self.kind) {
            (Some(v), None) => {
                ensure!(!v.is_empty(), Config, "vector.values must not be empty");
                Ok(v.clone())
            }
            (None, Some(kind)) => {
                ensure!(self.d >= 1, Config, "vector.d must be at least 1");
                Ok(test_vector(kind, self.d))
            }
            _ => Err(Error::Config("vector needs exactly one of `kind` or `values`".into())),
        }
    }
}

fn default_trials() -> usize {
    1000
}

fn default_eps() -> f64 {
    0.25
}

fn default_lambda() -> f64 {
    1e-2
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_repeats() -> usize {
    3
}

/// Experiment grid: every method × degree × output dimension, once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub metric: MetricKind,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub degrees: Vec<u32>,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub preprocess: Vec<Preprocess>,
    #[serde(default)]
    pub vector: Option<VectorConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn cells(&self) -> Vec<SketchSpec> {
        let mut out = Vec::new();
        for m in &self.methods {
            for &p in &self.degrees {
                for &dim in &self.dims {
                    out.push(SketchSpec::new(m.family, m.field, p, dim, 0));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells().is_empty() || self.seeds.is_empty() {
            return Ok(());
        }
        ensure!(self.trials >= 2, Config, "trials must be at least 2");
        ensure!(self.repeats >= 1, Config, "repeats must be at least 1");
        ensure!(self.eps >= 0.0, Config, "eps must be non-negative");
        ensure!(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            Config,
            "train_fraction must lie in (0, 1)"
        );
        if self.metric.needs_data() {
            let data = self.data.as_ref().ok_or_else(|| {
                Error::Config(format!("metric {} needs a [data] section", self.metric.as_str()))
            })?;
            ensure!(
                data.path.is_some() != data.synthetic.is_some(),
                Config,
                "[data] needs exactly one of `path` or `synthetic`"
            );
        } else {
            self.vector
                .as_ref()
                .ok_or_else(|| Error::Config(format!("metric {} needs a [vector] section", self.metric.as_str())))?
                .resolve()?;
        }
        Ok(())
    }
}

/// Reads a TOML config; relative data paths resolve against its directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(DataConfig { path: Some(p), .. }) = cfg.data.as_mut() {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let data = cfg.data.as_ref().expect("validated");
    match (&data.path, &data.synthetic) {
        (Some(p), None) => load_csv(p, data.label_last),
        (None, Some(s)) => synthetic_dataset(s),
        _ => Err(Error::Config("[data] needs exactly one of `path` or `synthetic`".into())),
    }
}

struct Prepared {
    train: Dataset,
    test: Option<Dataset>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let ds = load_data(cfg)?;
    if cfg.metric == MetricKind::KrrRmse {
        ensure!(ds.labels.is_some(), Config, "krr_rmse needs labelled data");
        let n_train = ((ds.len() as f64) * cfg.train_fraction).round() as usize;
        ensure!(
            n_train >= 1 && n_train < ds.len(),
            Config,
            "train_fraction leaves an empty split"
        );
        let (train, test) = ds.split(n_train)?;
        let pre = Preprocessor::fit(&cfg.preprocess, &train)?;
        Ok(Prepared {
            train: pre.apply(&train)?,
            test: Some(pre.apply(&test)?),
        })
    } else {
        let pre = Preprocessor::fit(&cfg.preprocess, &ds)?;
        Ok(Prepared {
            train: pre.apply(&ds)?,
            test: None,
        })
    }
}

fn measure(cfg: &ExperimentConfig, spec: &SketchSpec, data: Option<&Prepared>, exact: Option<&RealMatrix>) -> Result<f64> {
    spec.validate()?;
    match cfg.metric {
        MetricKind::RelativeFrobeniusError => {
            let x = &data.expect("data").train.x;
            let f = fit(spec, x.cols())?.transform(x)?;
            relative_frobenius_error(&estimate_gram(&f, &f)?.real_part(), exact.expect("exact kernel"))
        }
        MetricKind::KrrRmse => {
            let d = data.expect("data");
            let test = d.test.as_ref().expect("test split");
            let state = fit(spec, d.train.dim())?;
            let w = krr_fit(&state.transform(&d.train.x)?, d.train.labels.as_ref().expect("labels"), cfg.lambda)?;
            let pred = krr_predict(&w, &state.transform(&test.x)?)?;
            rmse(&pred, test.labels.as_ref().expect("labels"))
        }
        MetricKind::NormError => {
            let x = cfg.vector.as_ref().expect("vector").resolve()?;
            Ok(norm_preservation_stats(spec, &x, cfg.trials)?.mean_abs_error)
        }
        MetricKind::ErrorProbability => {
            let x = cfg.vector.as_ref().expect("vector").resolve()?;
            empirical_error_probability(spec, &x, cfg.eps, cfg.trials)
        }
        MetricKind::TransformTime => {
            let x = &data.expect("data").train.x;
            Ok(time_transform(spec, x, cfg.repeats)? as f64)
        }
    }
}

/// Runs the grid cell by cell, handing each cell's results to `sink` as soon
/// as the cell finishes. Failed cells are recorded with metric `error`.
pub fn run_experiment<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<Vec<ExperimentResult>>
where
    F: FnMut(&ExperimentResult) -> Result<()>,
{
    cfg.validate()?;
    let cells = cfg.cells();
    if cells.is_empty() || cfg.seeds.is_empty() {
        return Ok(Vec::new());
    }
    let data = if cfg.metric.needs_data() {
        Some(prepare(cfg)?)
    } else {
        None
    };
    let mut exact_cache: Vec<(u32, RealMatrix)> = Vec::new();
    let mut all = Vec::new();
    for cell in cells {
        let exact = if cfg.metric == MetricKind::RelativeFrobeniusError {
            if !exact_cache.iter().any(|(p, _)| *p == cell.degree) {
                let x = &data.as_ref().expect("data").train.x;
                exact_cache.push((cell.degree, polynomial_kernel(x, x, cell.degree)?));
            }
            exact_cache.iter().find(|(p, _)| *p == cell.degree).map(|(_, k)| k)
        } else {
            None
        };
        let run = |&seed: &u64| {
            let spec = cell.with_seed(seed);
            let start = Instant::now();
            match measure(cfg, &spec, data.as_ref(), exact) {
                Ok(v) => ExperimentResult::new(&spec, cfg.metric.as_str(), v, start.elapsed().as_nanos() as u64),
                Err(e) => ExperimentResult::failed(&spec, &e),
            }
        };
        let results: Vec<ExperimentResult> = if cfg.metric == MetricKind::TransformTime {
            cfg.seeds.iter().map(run).collect()
        } else {
            cfg.seeds.par_iter().map(run).collect()
        };
        for r in &results {
            sink(r)?;
        }
        all.extend(results);
    }
    Ok(all)
}

/// Mean and sample standard deviation of one cell's metric across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub family: Family,
    pub field: Field,
    pub p: u32,
    #[serde(rename = "D")]
    pub output_dim: usize,
    pub metric: String,
    pub count: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

pub fn aggregate(results: &[ExperimentResult]) -> Vec<AggregateRow> {
    let mut rows: Vec<(AggregateRow, Vec<f64>)> = Vec::new();
    for r in results {
        let metric = if r.error.is_some() { "error" } else { r.metric.as_str() };
        let pos = rows.iter().position(|(a, _)| {
            a.method == r.method && a.p == r.p && a.output_dim == r.output_dim && a.metric == metric
        });
        let idx = pos.unwrap_or_else(|| {
            rows.push((
                AggregateRow {
                    method: r.method.clone(),
                    family: r.family,
                    field: r.field,
                    p: r.p,
                    output_dim: r.output_dim,
                    metric: metric.to_owned(),
                    count: 0,
                    failures: 0,
                    mean: None,
                    std: None,
                },
                Vec::new(),
            ));
            rows.len() - 1
        });
        let (row, values) = &mut rows[idx];
        row.count += 1;
        match r.value {
            Some(v) if r.error.is_none() => values.push(v),
            _ => row.failures += 1,
        }
    }
    rows.into_iter()
        .map(|(mut row, values)| {
            if !values.is_empty() {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = if values.len() > 1 {
                    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                row.mean = Some(mean);
                row.std = Some(var.sqrt());
            }
            row
        })
        .collect()
}

pub fn write_aggregate_csv<W: std::io::Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "family", "field", "p", "D", "metric", "count", "failures", "mean", "std"])
        .map_err(csv_err)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.method.clone(),
            r.family.to_string(),
            r.field.to_string(),
            r.p.to_string(),
            r.output_dim.to_string(),
            r.metric.clone(),
            r.count.to_string(),
            r.failures.to_string(),
            fmt(r.mean),
            fmt(r.std),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
name = "smoke"
metric = "relative_frobenius_error"
methods = [{ family = "gaussian", field = "ctr" }, { family = "tensor_sketch", field = "real" }]
degrees = [2]
dims = [16]
seeds = [1, 2]
preprocess = ["unit_normalize", { homogenize = { gamma = 0.5, nu = 0.5 } }]

[data.synthetic]
n = 30
d = 4
"#;

    #[test]
    fn smoke_grid_runs_and_is_deterministic() {
        let cfg = ExperimentConfig::from_toml(SMOKE).unwrap();
        let mut streamed = 0;
        let a = run_experiment(&cfg, |_| {
            streamed += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!((a.len(), streamed), (4, 4));
        assert!(a.iter().all(|r| r.error.is_none() && r.value.unwrap() > 0.0));
        let b = run_experiment(&cfg, |_| Ok(())).unwrap();
        let values = |v: &[ExperimentResult]| v.iter().map(|r| r.value).collect::<Vec<_>>();
        assert_eq!(values(&a), values(&b));
        let agg = aggregate(&a);
        assert_eq!(agg.len(), 2);
        assert!(agg.iter().all(|r| r.count == 2 && r.std.is_some()));
    }

    #[test]
    fn empty_grid_is_empty() {
        let cfg = ExperimentConfig::from_toml("metric = \"krr_rmse\"").unwrap();
        assert!(run_experiment(&cfg, |_| Ok(())).unwrap().is_empty());
    }

    #[test]
    fn failed_cells_are_recorded() {
        let text = SMOKE.replace("dims = [16]", "dims = [15]");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let res = run_experiment(&cfg, |_| Ok(())).unwrap();
        let failed: Vec<_> = res.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(failed.len(), 2);
        assert!(failed.iter().all(|r| r.metric == "error" && r.value.is_none()));
    }

    #[test]
    fn config_errors() {
        assert!(matches!(ExperimentConfig::from_toml("metric = \"nope\""), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml("metric = \"norm_error\"\nbogus = 1").is_err());
        let cfg = ExperimentConfig::from_toml(
            "metric = \"norm_error\"\nmethods=[{family=\"gaussian\",field=\"real\"}]\ndegrees=[2]\ndims=[4]\nseeds=[1]",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn vector_metrics() {
        let cfg = ExperimentConfig::from_toml(
            r#"
metric = "error_probability"
methods = [{ family = "rademacher", field = "real" }]
degrees = [2]
dims = [64]
seeds = [3]
trials = 200
[vector]
kind = "flat"
d = 8
"#,
        )
        .unwrap();
        let res = run_experiment(&cfg, |_| Ok(())).unwrap();
        let v = res[0].value.unwrap();
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn test_vectors_have_expected_ratio() {
        let spiky = test_vector(VectorKind::Spiky, 64);
        let flat = test_vector(VectorKind::Flat, 64);
        let ratio = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((ratio(&spiky) - 0.58).abs() < 0.005);
        assert!((ratio(&flat) - 0.125).abs() < 1e-15);
    }
}
