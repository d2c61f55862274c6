//! Command-line interface.
//!
//! Exit codes: 0 success, 1 internal or I/O error, 2 invalid flags or
//! arguments, 3 unparseable input or config. Every failure ends with one line
//! `error: code=<n> kind=<kind> reason=<text>` on standard error.

use std::ffi::OsString;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{aggregate, load_config, load_csv, preprocess, run_experiment, write_aggregate_csv, Preprocess};
use crate::randomness::parse_seed;
use crate::sketches::{fit, write_binary, write_csv, Family, Field, SketchSpec};
use crate::theory::{variance_report, VarianceReport};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "POLYSKETCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "polysketch", version, about = "Random feature sketches for the polynomial kernel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sketch the rows of a CSV file and write the feature matrix.
    Sketch(SketchArgs),
    /// Closed-form variance report for one pair of vectors, as JSON.
    Variance(VarianceArgs),
    /// Variance grid over families and fields for one pair of vectors.
    VarianceTable(TableArgs),
    /// Run an experiment grid from a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Rademacher,
    ProductSrht,
    TensorSketch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FieldArg {
    Real,
    Complex,
    Ctr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Binary,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Rademacher => Family::Rademacher,
            FamilyArg::ProductSrht => Family::ProductSrht,
            FamilyArg::TensorSketch => Family::TensorSketch,
        }
    }
}

impl From<FieldArg> for Field {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Real => Field::Real,
            FieldArg::Complex => Field::Complex,
            FieldArg::Ctr => Field::Ctr,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value = "real")]
    pub field: FieldArg,
    /// Polynomial degree p.
    #[arg(long)]
    pub degree: u32,
    /// Output dimension D.
    #[arg(long)]
    pub dim: usize,
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Input CSV, one data point per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the last CSV column as a label and drop it.
    #[arg(long)]
    pub label_last: bool,
    /// Seed, decimal or 0x-prefixed hex.
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: u64,
    /// Normalize every row to unit norm first.
    #[arg(long)]
    pub normalize: bool,
    /// Kernel scale γ in (γ xᵀy + ν)^p; appends a constant coordinate.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Kernel offset ν in (γ xᵀy + ν)^p.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; inferred from a `.bin` extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Overwrite an existing output file.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Comma-separated entries of x.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    /// Comma-separated entries of y.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub y: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub degree: u32,
    /// Output dimension D (even).
    #[arg(long)]
    pub dim: usize,
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub y: Vec<f64>,
    /// Emit JSON instead of a text table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// JSON-lines results; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aggregate CSV; defaults to `<out>.aggregate.csv` when --out is given.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config(_) => 3,
        Error::Spec(_) | Error::Argument(_) | Error::Domain(_) | Error::Dimension(_) | Error::Validation(_) => 2,
        Error::Resource(_) | Error::Io(_) => 1,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Dimension(_) => "dimension",
        Error::Argument(_) => "argument",
        Error::Spec(_) => "spec",
        Error::Resource(_) => "resource",
        Error::Domain(_) => "domain",
        Error::Validation(_) => "validation",
        Error::Parse { .. } => "parse",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

fn report(code: i32, kind: &str, reason: &str) {
    let reason = reason.replace('\n', " ");
    eprintln!("error: code={code} kind={kind} reason={}", reason.trim());
}

fn create_output(path: &Path, force: bool) -> Result<BufWriter<File>> {
    let file = if force {
        File::create(path)
    } else {
        OpenOptions::new().write(true).create_new(true).open(path)
    };
    file.map(BufWriter::new).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Argument(format!("{} exists; pass --force to overwrite", path.display()))
        } else {
            Error::Io(e)
        }
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Argument(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Resource(e.to_string()))?;
    }
    Ok(())
}

fn cmd_sketch(a: &SketchArgs) -> Result<()> {
    let spec = SketchSpec::new(a.spec.family.into(), a.spec.field.into(), a.spec.degree, a.spec.dim, a.seed);
    spec.validate()?;
    if let Some(out) = &a.out {
        if out.exists() && !a.force {
            return Err(Error::Argument(format!("{} exists; pass --force to overwrite", out.display())));
        }
    }
    let mut steps = Vec::new();
    if a.normalize {
        steps.push(Preprocess::UnitNormalize);
    }
    if a.gamma.is_some() || a.nu.is_some() {
        steps.push(Preprocess::Homogenize {
            gamma: a.gamma.unwrap_or(1.0),
            nu: a.nu.unwrap_or(0.0),
        });
    }
    let ds = preprocess(&load_csv(&a.input, a.label_last)?, &steps)?;
    let start = Instant::now();
    let state = fit(&spec, ds.dim())?;
    let features = state.transform(&ds.x)?;
    let elapsed = start.elapsed();
    let binary = match a.format {
        Some(FormatArg::Binary) => true,
        Some(FormatArg::Csv) => false,
        None => a.out.as_ref().and_then(|p| p.extension()).is_some_and(|e| e == "bin"),
    };
    let write = |w: &mut dyn Write| -> Result<()> {
        if binary {
            write_binary(&features, &mut *w)?;
        } else {
            write_csv(&features, &mut *w)?;
        }
        w.flush()?;
        Ok(())
    };
    match &a.out {
        Some(path) => write(&mut create_output(path, a.force)?)?,
        None => write(&mut BufWriter::new(std::io::stdout().lock()))?,
    }
    eprintln!(
        "{spec} d={} n={} rows={} fit+transform={:.6}s",
        ds.dim(),
        ds.len(),
        features.rows(),
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    println!("{text}");
    Ok(())
}

fn cmd_variance(a: &VarianceArgs) -> Result<()> {
    let report: VarianceReport = variance_report(
        a.spec.family.into(),
        a.spec.field.into(),
        &a.x,
        &a.y,
        a.spec.degree,
        a.spec.dim,
    )?;
    print_json(&report)
}

fn cmd_variance_table(a: &TableArgs) -> Result<()> {
    let families = [Family::Gaussian, Family::Rademacher, Family::ProductSrht];
    let mut rows = Vec::new();
    for family in families {
        let real = variance_report(family, Field::Real, &a.x, &a.y, a.degree, a.dim)?;
        let complex = variance_report(family, Field::Complex, &a.x, &a.y, a.degree, a.dim)?;
        rows.push((family, real, complex));
    }
    if a.json {
        let out: Vec<_> = rows
            .iter()
            .map(|(f, r, c)| {
                serde_json::json!({
                    "family": f,
                    "real_variance": r.variance,
                    "complex_variance": c.variance,
                    "complex_pseudo_variance": c.pseudo_variance,
                    "ctr_variance": c.ctr_variance,
                    "gap": r.gap,
                })
            })
            .collect();
        return print_json(&out);
    }
    println!(
        "{:<14} {:>24} {:>24} {:>24} {:>24}",
        "family", "var_real", "var_complex", "pvar_complex", "var_ctr"
    );
    for (f, r, c) in &rows {
        println!(
            "{:<14} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e}",
            f.as_str(),
            r.variance,
            c.variance,
            c.pseudo_variance,
            c.ctr_variance.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<bool> {
    let cfg = load_config(&a.config)?;
    let agg_path = a.aggregate.clone().or_else(|| {
        a.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".aggregate.csv");
            PathBuf::from(s)
        })
    });
    for p in a.out.iter().chain(agg_path.iter()) {
        if p.exists() && !a.force {
            return Err(Error::Argument(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    let mut sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create_output(p, a.force)?),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let results = run_experiment(&cfg, |r| {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writeln!(sink, "{line}")?;
        sink.flush()?;
        Ok(())
    })?;
    drop(sink);
    if let Some(p) = agg_path {
        write_aggregate_csv(&aggregate(&results), create_output(&p, a.force)?)?;
    }
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        report(1, "cells", &format!("{failed} of {} results failed", results.len()));
    }
    Ok(failed == 0)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code != 0 {
                let first = e.to_string();
                report(2, "usage", first.lines().next().unwrap_or("invalid arguments"));
            }
            return code;
        }
    };
    let outcome = configure_threads().and_then(|_| match &cli.command {
        Command::Sketch(a) => cmd_sketch(a).map(|_| true),
        Command::Variance(a) => cmd_variance(a).map(|_| true),
        Command::VarianceTable(a) => cmd_variance_table(a).map(|_| true),
        Command::Experiment(a) => cmd_experiment(a),
    });
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let code = exit_code(&e);
            report(code, kind(&e), &e.to_string());
            code
        }
    }
}
