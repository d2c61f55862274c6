//! Polynomial-kernel sketches: Gaussian, Rademacher and ProductSRHT in real,
//! complex and complex-to-real (CtR) form, plus the TensorSketch baseline.
//!
//! Every family except TensorSketch builds the feature map
//! `Φ(x) = c · (W_1 x ⊙ ... ⊙ W_p x)` from `p` independent projections, whose
//! inner products estimate the homogeneous kernel `(xᵀy)^p` without bias.
//! Real sketches draw `D` rows and scale by `1/√D`. Complex and CtR sketches
//! draw `D/2` complex rows and scale by `√(2/D)`; CtR then stacks real and
//! imaginary parts to a real vector of length `D`.

mod export;
mod transform;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{ComplexMatrix, PaddedDim, RealMatrix};
use crate::randomness::{
    sample_countsketch_hashes, sample_matrix, sample_srht_block, CountSketchHashes, SrhtBlock,
    StreamKey, WeightDist, WeightField, WeightMatrix,
};

pub use export::{read_binary, write_binary, write_csv, BinaryFeatures, BINARY_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Rademacher,
    ProductSrht,
    TensorSketch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Real,
    Complex,
    Ctr,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Gaussian,
        Family::Rademacher,
        Family::ProductSrht,
        Family::TensorSketch,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Rademacher => "rademacher",
            Family::ProductSrht => "product_srht",
            Family::TensorSketch => "tensor_sketch",
        }
    }
}

impl Field {
    pub fn as_str(&self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
            Field::Ctr => "ctr",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "rademacher" => Ok(Family::Rademacher),
            "product_srht" | "productsrht" | "srht" => Ok(Family::ProductSrht),
            "tensor_sketch" | "tensorsketch" => Ok(Family::TensorSketch),
            other => Err(Error::Argument(format!("unknown sketch family {other:?}"))),
        }
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            "ctr" => Ok(Field::Ctr),
            other => Err(Error::Argument(format!("unknown number field {other:?}"))),
        }
    }
}

/// The seven real-valued sketch variants.
pub const REAL_VALUED_VARIANTS: [(Family, Field); 7] = [
    (Family::Gaussian, Field::Real),
    (Family::Gaussian, Field::Ctr),
    (Family::Rademacher, Field::Real),
    (Family::Rademacher, Field::Ctr),
    (Family::ProductSrht, Field::Real),
    (Family::ProductSrht, Field::Ctr),
    (Family::TensorSketch, Field::Real),
];

/// Full description of a sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SketchSpec {
    pub family: Family,
    pub field: Field,
    pub degree: u32,
    pub output_dim: usize,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(family: Family, field: Field, degree: u32, output_dim: usize, seed: u64) -> Self {
        Self {
            family,
            field,
            degree,
            output_dim,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.degree >= 1, Spec, "degree p must be at least 1");
        ensure!(self.output_dim >= 1, Spec, "output dimension D must be at least 1");
        if self.family == Family::TensorSketch {
            ensure!(
                self.field == Field::Real,
                Spec,
                "tensor_sketch only supports the real field"
            );
        }
        match self.field {
            Field::Ctr => ensure!(self.output_dim % 2 == 0, Spec, "D must be even for ctr"),
            Field::Complex => ensure!(self.output_dim % 2 == 0, Spec, "D must be even for complex"),
            Field::Real => {}
        }
        Ok(())
    }

    /// Rows of each projection block: `D` for real, `D/2` for complex and CtR.
    pub fn block_rows(&self) -> usize {
        match self.field {
            Field::Real => self.output_dim,
            Field::Complex | Field::Ctr => self.output_dim / 2,
        }
    }

    pub fn weight_field(&self) -> WeightField {
        match self.field {
            Field::Real => WeightField::Real,
            Field::Complex | Field::Ctr => WeightField::Complex,
        }
    }

    /// Feature scaling `1/√D` (real) or `√(2/D)` (complex, CtR).
    pub fn feature_scale(&self) -> f64 {
        1.0 / (self.block_rows() as f64).sqrt()
    }

    /// Short identifier such as `ctr_product_srht`.
    pub fn method_id(&self) -> String {
        match self.field {
            Field::Real => self.family.as_str().to_owned(),
            other => format!("{}_{}", other.as_str(), self.family.as_str()),
        }
    }
}

impl fmt::Display for SketchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "family={} field={} p={} D={} seed={}",
            self.family, self.field, self.degree, self.output_dim, self.seed
        )
    }
}

/// Fitted randomness of a sketch.
#[derive(Debug, Clone, PartialEq)]
pub enum SketchBlocks {
    Dense(Vec<WeightMatrix>),
    Srht { padded: PaddedDim, blocks: Vec<SrhtBlock> },
    TensorSketch(Vec<CountSketchHashes>),
}

/// Immutable fitted sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchState {
    spec: SketchSpec,
    input_dim: usize,
    blocks: SketchBlocks,
}

/// Samples the `p` independent blocks of `spec` for inputs of dimension `d`.
///
/// Block `i` is drawn from the stream `(seed, ("block", i))`.
pub fn fit(spec: &SketchSpec, d: usize) -> Result<SketchState> {
    spec.validate()?;
    ensure!(d >= 1, Argument, "input dimension must be at least 1");
    let root = StreamKey::new(spec.seed);
    let rows = spec.block_rows();
    let keys = (0..spec.degree as u64).map(|i| root.child("block", i));
    let blocks = match spec.family {
        Family::Gaussian | Family::Rademacher => {
            let dist = if spec.family == Family::Gaussian {
                WeightDist::Gaussian
            } else {
                WeightDist::Rademacher
            };
            SketchBlocks::Dense(
                keys.map(|k| sample_matrix(&k, rows, d, dist, spec.weight_field()))
                    .collect::<Result<_>>()?,
            )
        }
        Family::ProductSrht => {
            let padded = PaddedDim::new(d)?;
            SketchBlocks::Srht {
                padded,
                blocks: keys
                    .map(|k| sample_srht_block(&k, padded.padded_d, rows, spec.weight_field()))
                    .collect::<Result<_>>()?,
            }
        }
        Family::TensorSketch => SketchBlocks::TensorSketch(
            keys.map(|k| sample_countsketch_hashes(&k, d, spec.output_dim))
                .collect::<Result<_>>()?,
        ),
    };
    Ok(SketchState {
        spec: *spec,
        input_dim: d,
        blocks,
    })
}

impl SketchState {
    pub fn spec(&self) -> &SketchSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn blocks(&self) -> &SketchBlocks {
        &self.blocks
    }

    pub fn padded(&self) -> Option<PaddedDim> {
        match &self.blocks {
            SketchBlocks::Srht { padded, .. } => Some(*padded),
            _ => None,
        }
    }

    /// Features of the rows of `x` (n×d), one column per data point.
    pub fn transform(&self, x: &RealMatrix) -> Result<FeatureMatrix> {
        ensure!(
            x.cols() == self.input_dim,
            Dimension,
            "input has {} columns but the sketch was fitted for d={}",
            x.cols(),
            self.input_dim
        );
        transform::transform(self, x)
    }

    /// TensorSketch features; errors for any other family.
    pub fn transform_tensorsketch(&self, x: &RealMatrix) -> Result<FeatureMatrix> {
        ensure!(
            self.spec.family == Family::TensorSketch,
            Argument,
            "transform_tensorsketch requires a tensor_sketch state, got {}",
            self.spec.family
        );
        self.transform(x)
    }

    /// `k̂(x, y)` for a single pair: real for real/CtR/TensorSketch, complex
    /// `Φ_C(x)ᵀ conj(Φ_C(y))` for the complex field.
    pub fn estimate_pair(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        ensure!(
            x.len() == self.input_dim && y.len() == self.input_dim,
            Dimension,
            "pair dimensions ({}, {}) do not match d={}",
            x.len(),
            y.len(),
            self.input_dim
        );
        transform::estimate_pair(self, x, y)
    }

    /// `‖Φ(x)‖²`.
    pub fn squared_norm(&self, x: &[f64]) -> Result<f64> {
        ensure!(
            x.len() == self.input_dim,
            Dimension,
            "input of length {} does not match d={}",
            x.len(),
            self.input_dim
        );
        let f = transform::transform(self, &RealMatrix::from_vec(1, x.len(), x.to_vec())?)?;
        Ok(match f.data() {
            FeatureData::Real(v) => v.iter().map(|a| a * a).sum(),
            FeatureData::Complex(v) => v.iter().map(|a| a.norm_sqr()).sum(),
        })
    }
}

/// Feature payload of a [`FeatureMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// `rows × n` features, stored column-major so each data point is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    spec: SketchSpec,
    input_dim: usize,
    rows: usize,
    n: usize,
    data: FeatureData,
}

impl FeatureMatrix {
    pub(crate) fn new(spec: SketchSpec, input_dim: usize, rows: usize, n: usize, data: FeatureData) -> Self {
        debug_assert_eq!(
            match &data {
                FeatureData::Real(v) => v.len(),
                FeatureData::Complex(v) => v.len(),
            },
            rows * n
        );
        Self {
            spec,
            input_dim,
            rows,
            n,
            data,
        }
    }

    pub fn spec(&self) -> &SketchSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Feature dimension (`D`, or `D/2` for the complex field).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of data points.
    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &FeatureData {
        &self.data
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.data, FeatureData::Complex(_))
    }

    pub fn real_column(&self, j: usize) -> Option<&[f64]> {
        match &self.data {
            FeatureData::Real(v) => Some(&v[j * self.rows..(j + 1) * self.rows]),
            FeatureData::Complex(_) => None,
        }
    }

    pub fn complex_column(&self, j: usize) -> Option<&[Complex64]> {
        match &self.data {
            FeatureData::Complex(v) => Some(&v[j * self.rows..(j + 1) * self.rows]),
            FeatureData::Real(_) => None,
        }
    }

    /// Entry (feature `i`, point `j`) as a complex number.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match &self.data {
            FeatureData::Real(v) => Complex64::new(v[j * self.rows + i], 0.0),
            FeatureData::Complex(v) => v[j * self.rows + i],
        }
    }

    /// The real feature matrix laid out as `n × rows` (one point per row).
    pub fn to_point_rows(&self) -> Option<RealMatrix> {
        match &self.data {
            FeatureData::Real(v) => RealMatrix::from_vec(self.n, self.rows, v.clone()).ok(),
            FeatureData::Complex(_) => None,
        }
    }
}

/// Approximate Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Gram {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

impl Gram {
    /// `Re{K̂}`; for the complex field this is the CtR estimate.
    pub fn real_part(&self) -> RealMatrix {
        match self {
            Gram::Real(m) => m.clone(),
            Gram::Complex(m) => m.real_part(),
        }
    }
}

/// `K̂ = Fxᵀ Fy` (real, CtR, TensorSketch) or `Fxᵀ conj(Fy)` (complex).
pub fn estimate_gram(fx: &FeatureMatrix, fy: &FeatureMatrix) -> Result<Gram> {
    ensure!(
        fx.spec == fy.spec && fx.input_dim == fy.input_dim,
        Argument,
        "feature matrices come from different sketches ({} vs {})",
        fx.spec,
        fy.spec
    );
    transform::gram(fx, fy)
}

/// `(√γ x, √ν)` for every row `x` of `x`, so `(γ xᵀy + ν)^p = (x̃ᵀỹ)^p`.
pub fn homogenize(x: &RealMatrix, gamma: f64, nu: f64) -> Result<RealMatrix> {
    ensure!(
        gamma >= 0.0 && nu >= 0.0 && gamma.is_finite() && nu.is_finite(),
        Argument,
        "gamma and nu must be finite and non-negative (gamma={gamma}, nu={nu})"
    );
    let (sg, sn) = (gamma.sqrt(), nu.sqrt());
    let d = x.cols();
    Ok(RealMatrix::from_fn(x.rows(), d + 1, |i, j| {
        if j < d {
            sg * x.get(i, j)
        } else {
            sn
        }
    }))
}

/// Largest `d^p` accepted by [`explicit_tensor_feature`].
pub const MAX_EXPLICIT_TENSOR_LEN: usize = 1_000_000;

/// `x^{⊗p}` in lexicographic index order (first factor slowest).
pub fn explicit_tensor_feature(x: &[f64], p: u32) -> Result<Vec<f64>> {
    ensure!(p >= 1, Argument, "degree must be at least 1");
    let len = (x.len() as u128).checked_pow(p).unwrap_or(u128::MAX);
    if len > MAX_EXPLICIT_TENSOR_LEN as u128 {
        return Err(Error::Resource(format!(
            "explicit tensor of length {}^{} exceeds {MAX_EXPLICIT_TENSOR_LEN}",
            x.len(),
            p
        )));
    }
    let mut out = x.to_vec();
    for _ in 1..p {
        out = out
            .iter()
            .flat_map(|&a| x.iter().map(move |&b| a * b))
            .collect();
    }
    Ok(out)
}
