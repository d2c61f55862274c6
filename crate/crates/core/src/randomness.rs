//! Seed-reproducible generation of every random object used by the sketches.
//!
//! A [`StreamKey`] is a base seed plus a labeled path such as
//! `[("block", 2), ("perm", 0)]`. The path is hashed into a 256-bit ChaCha8
//! key, so any stream can be reconstructed from its path alone, regardless of
//! which other streams were drawn before it or on which thread.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::linalg::{ComplexMatrix, RealMatrix};

/// Base seed plus an ordered label path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub base_seed: u64,
    pub labels: Vec<(String, u64)>,
}

impl StreamKey {
    pub fn new(base_seed: u64) -> Self {
        Self {
            base_seed,
            labels: Vec::new(),
        }
    }

    /// Extends the path by one `(tag, index)` label.
    pub fn child(&self, tag: &str, index: u64) -> Self {
        let mut labels = self.labels.clone();
        labels.push((tag.to_owned(), index));
        Self {
            base_seed: self.base_seed,
            labels,
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        const LANE_SALT: [u64; 4] = [
            0x9E37_79B9_7F4A_7C15,
            0xC2B2_AE3D_27D4_EB4F,
            0x1656_67B1_9E37_79F9,
            0x85EB_CA77_C2B2_AE63,
        ];
        let mut lanes = LANE_SALT.map(|s| splitmix64(self.base_seed ^ s));
        let mut absorb = |word: u64| {
            for (lane, salt) in lanes.iter_mut().zip(LANE_SALT) {
                *lane = splitmix64(*lane ^ word.wrapping_mul(salt | 1));
            }
        };
        absorb(self.labels.len() as u64);
        for (tag, index) in &self.labels {
            let bytes = tag.as_bytes();
            absorb(bytes.len() as u64);
            for chunk in bytes.chunks(8) {
                let mut buf = [0u8; 8];
                buf[..chunk.len()].copy_from_slice(chunk);
                absorb(u64::from_le_bytes(buf));
            }
            absorb(*index);
        }
        let mut out = [0u8; 32];
        for (dst, lane) in out.chunks_exact_mut(8).zip(lanes) {
            dst.copy_from_slice(&lane.to_le_bytes());
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pseudo-random stream for one [`StreamKey`].
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    /// Buffered random bits for sign draws.
    bits: u64,
    bits_left: u32,
}

/// Counter-based stream for `key`; identical keys give bit-identical output.
pub fn derive_stream(key: &StreamKey) -> Stream {
    Stream {
        rng: ChaCha8Rng::from_seed(key.key_bytes()),
        bits: 0,
        bits_left: 0,
    }
}

impl Stream {
    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// CN(0, 1): `(a + ib) / sqrt(2)` with `a, b ~ N(0, 1)`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let a = self.standard_normal();
        let b = self.standard_normal();
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn take_bits(&mut self, n: u32) -> u64 {
        if self.bits_left < n {
            self.bits = self.rng.next_u64();
            self.bits_left = 64;
        }
        let out = self.bits & ((1u64 << n) - 1);
        self.bits >>= n;
        self.bits_left -= n;
        out
    }

    /// Uniform on {+1, -1}.
    pub fn rademacher(&mut self) -> f64 {
        if self.take_bits(1) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform on {1, -1, i, -i}.
    pub fn complex_rademacher(&mut self) -> Complex64 {
        match self.take_bits(2) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(-1.0, 0.0),
            2 => Complex64::new(0.0, 1.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// Uniform integer in `0..n` (`n >= 1`), independent of pointer width.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n as u64) as usize
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Entry distribution of a dense projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDist {
    Gaussian,
    Rademacher,
}

/// Number field of the random weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightField {
    Real,
    Complex,
}

/// A sampled dense projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMatrix {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

impl WeightMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            WeightMatrix::Real(m) => m.shape(),
            WeightMatrix::Complex(m) => m.shape(),
        }
    }

    /// Entry as a complex number (real matrices have zero imaginary part).
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            WeightMatrix::Real(m) => Complex64::new(m.get(i, j), 0.0),
            WeightMatrix::Complex(m) => m.get(i, j),
        }
    }
}

/// Matrix with i.i.d. entries, each satisfying `E[w conj(w)] = 1`.
pub fn sample_matrix(
    key: &StreamKey,
    rows: usize,
    cols: usize,
    dist: WeightDist,
    field: WeightField,
) -> Result<WeightMatrix> {
    ensure!(
        rows >= 1 && cols >= 1,
        Argument,
        "matrix dimensions must be positive, got {rows}x{cols}"
    );
    let mut s = derive_stream(key);
    Ok(match (dist, field) {
        (WeightDist::Gaussian, WeightField::Real) => {
            WeightMatrix::Real(RealMatrix::from_fn(rows, cols, |_, _| s.standard_normal()))
        }
        (WeightDist::Rademacher, WeightField::Real) => {
            WeightMatrix::Real(RealMatrix::from_fn(rows, cols, |_, _| s.rademacher()))
        }
        (WeightDist::Gaussian, WeightField::Complex) => {
            WeightMatrix::Complex(ComplexMatrix::from_fn(rows, cols, |_, _| s.complex_normal()))
        }
        (WeightDist::Rademacher, WeightField::Complex) => {
            WeightMatrix::Complex(ComplexMatrix::from_fn(rows, cols, |_, _| s.complex_rademacher()))
        }
    })
}

/// Random sign diagonal of one SRHT block.
#[derive(Debug, Clone, PartialEq)]
pub enum SignDiagonal {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl SignDiagonal {
    pub fn len(&self) -> usize {
        match self {
            SignDiagonal::Real(v) => v.len(),
            SignDiagonal::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entry(&self, i: usize) -> Complex64 {
        match self {
            SignDiagonal::Real(v) => Complex64::new(v[i], 0.0),
            SignDiagonal::Complex(v) => v[i],
        }
    }
}

/// Randomness of one structured block `W = P H D`.
///
/// `row_indices` are 0-based rows of `H_{padded_d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrhtBlock {
    pub diag: SignDiagonal,
    pub row_indices: Vec<usize>,
}

/// Samples `D` and `P` of one ProductSRHT block.
///
/// The selected rows are the first `rows` entries of a uniformly shuffled
/// `B`-fold concatenation of `0..padded_d`, `B = ceil(rows / padded_d)`.
pub fn sample_srht_block(
    key: &StreamKey,
    padded_d: usize,
    rows: usize,
    field: WeightField,
) -> Result<SrhtBlock> {
    ensure!(
        padded_d >= 1 && padded_d.is_power_of_two(),
        Argument,
        "padded dimension {padded_d} is not a power of two"
    );
    ensure!(rows >= 1, Argument, "an SRHT block needs at least one row");
    let mut ds = derive_stream(&key.child("diag", 0));
    let diag = match field {
        WeightField::Real => SignDiagonal::Real((0..padded_d).map(|_| ds.rademacher()).collect()),
        WeightField::Complex => {
            SignDiagonal::Complex((0..padded_d).map(|_| ds.complex_rademacher()).collect())
        }
    };
    let copies = rows.div_ceil(padded_d);
    let mut stacked: Vec<usize> = (0..copies).flat_map(|_| 0..padded_d).collect();
    let mut ps = derive_stream(&key.child("perm", 0));
    ps.shuffle(&mut stacked);
    stacked.truncate(rows);
    Ok(SrhtBlock {
        diag,
        row_indices: stacked,
    })
}

/// Hash tables of one CountSketch `R^d -> R^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketchHashes {
    pub index_map: Vec<usize>,
    pub sign_map: Vec<f64>,
}

pub fn sample_countsketch_hashes(key: &StreamKey, d: usize, out_dim: usize) -> Result<CountSketchHashes> {
    ensure!(
        d >= 1 && out_dim >= 1,
        Argument,
        "CountSketch needs d >= 1 and D >= 1, got d={d}, D={out_dim}"
    );
    let mut is = derive_stream(&key.child("index", 0));
    let mut ss = derive_stream(&key.child("sign", 0));
    Ok(CountSketchHashes {
        index_map: (0..d).map(|_| is.below(out_dim)).collect(),
        sign_map: (0..d).map(|_| ss.rademacher()).collect(),
    })
}

/// Parses a seed given as decimal or `0x`-prefixed hex.
pub fn parse_seed(text: &str) -> std::result::Result<u64, String> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse::<u64>(),
    };
    parsed.map_err(|e| format!("invalid seed {text:?}: {e}"))
}
