//! Dense real/complex matrices, the fast Walsh-Hadamard transform and
//! FFT-based circular convolution.
//!
//! Matrices are row-major. Products go through `matrixmultiply::dgemm` with
//! explicit strides, which also lets the real and imaginary parts of an
//! interleaved complex matrix be multiplied as two strided real views
//! without copying.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure, Error, Result};

/// Scalars the sketches are built over: `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + std::fmt::Debug
    + PartialEq
{
    fn zero() -> Self;
    fn one() -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = Matrix<f64>;
pub type ComplexMatrix = Matrix<Complex64>;

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        ensure!(
            data.len() == rows * cols,
            Dimension,
            "buffer of length {} cannot hold a {rows}x{cols} matrix",
            data.len()
        );
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        ensure!(
            rows.iter().all(|r| r.len() == cols),
            Dimension,
            "ragged rows"
        );
        let data = rows.iter().flatten().copied().collect();
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        ensure!(
            self.shape() == other.shape(),
            Dimension,
            "hadamard product of {:?} and {:?}",
            self.shape(),
            other.shape()
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v = *v * s;
        }
    }

    /// Plain triple-loop product, used where `T` is complex.
    pub fn matmul_naive(&self, other: &Self) -> Result<Self> {
        ensure!(
            self.cols == other.rows,
            Dimension,
            "cannot multiply {:?} by {:?}",
            self.shape(),
            other.shape()
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `A v`.
    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        ensure!(
            v.len() == self.cols,
            Dimension,
            "vector of length {} against {} columns",
            v.len(),
            self.cols
        );
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }
}

impl RealMatrix {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        ensure!(
            self.cols == other.rows,
            Dimension,
            "cannot multiply {:?} by {:?}",
            self.shape(),
            other.shape()
        );
        let mut out = Self::zeros(self.rows, other.cols);
        let (m, k, n) = (self.rows, self.cols, other.cols);
        gemm(
            m,
            k,
            n,
            View::new(&self.data, 0, k as isize, 1),
            View::new(&other.data, 0, n as isize, 1),
            &mut out.data,
            n as isize,
            1,
        );
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl ComplexMatrix {
    pub fn real_part(&self) -> RealMatrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }

    pub fn imag_part(&self) -> RealMatrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| c.im).collect(),
        }
    }
}

/// Interleaved `(re, im)` view of a complex slice.
pub(crate) fn complex_flat(data: &[Complex64]) -> &[f64] {
    // SAFETY: Complex64 is repr(C) { re, im }.
    unsafe { std::slice::from_raw_parts(data.as_ptr() as *const f64, data.len() * 2) }
}

/// Strided read-only view for `gemm`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    data: &'a [f64],
    offset: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    pub(crate) fn new(data: &'a [f64], offset: usize, rs: isize, cs: isize) -> Self {
        Self {
            data,
            offset,
            rs,
            cs,
        }
    }

    /// Real (`part = 0`) or imaginary (`part = 1`) plane of a row-major
    /// interleaved complex matrix with `cols` columns.
    pub(crate) fn complex_plane(data: &'a [Complex64], cols: usize, part: usize) -> Self {
        Self::new(complex_flat(data), part, 2 * cols as isize, 2)
    }

    fn max_index(&self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            return self.offset;
        }
        let last = self.offset as isize + (rows as isize - 1) * self.rs + (cols as isize - 1) * self.cs;
        last as usize
    }
}

const SMALL_GEMM: usize = 512;

/// `C := A B` with `A` m×k, `B` k×n; `C` is overwritten.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: View<'_>,
    b: View<'_>,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.rs >= 0 && a.cs >= 0 && b.rs >= 0 && b.cs >= 0 && rsc >= 0 && csc >= 0);
    if k > 0 {
        assert!(a.max_index(m, k) < a.data.len(), "gemm: A view out of bounds");
        assert!(b.max_index(k, n) < b.data.len(), "gemm: B view out of bounds");
    }
    let c_last = (m as isize - 1) * rsc + (n as isize - 1) * csc;
    assert!((c_last as usize) < c.len(), "gemm: C view out of bounds");
    if m * k * n <= SMALL_GEMM {
        let at = |v: &View<'_>, i: usize, j: usize| {
            v.data[(v.offset as isize + i as isize * v.rs + j as isize * v.cs) as usize]
        };
        for i in 0..m {
            for j in 0..n {
                let s: f64 = (0..k).map(|l| at(&a, i, l) * at(&b, l, j)).sum();
                c[(i as isize * rsc + j as isize * csc) as usize] = s;
            }
        }
        return;
    }
    // SAFETY: every index touched is bounded by the asserts above and all
    // strides are non-negative.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr().add(a.offset),
            a.rs,
            a.cs,
            b.data.as_ptr().add(b.offset),
            b.rs,
            b.cs,
            0.0,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

/// Input dimension padded up to the next power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PaddedDim {
    pub original_d: usize,
    pub padded_d: usize,
}

impl PaddedDim {
    pub fn new(original_d: usize) -> Result<Self> {
        ensure!(original_d >= 1, Argument, "input dimension must be at least 1");
        Ok(Self {
            original_d,
            padded_d: original_d.next_power_of_two(),
        })
    }

    pub fn log2(&self) -> u32 {
        self.padded_d.trailing_zeros()
    }
}

/// Unnormalized in-place Walsh-Hadamard transform, `v <- H v`.
///
/// `H` follows the Sylvester recursion `H_2n = [[H_n, H_n], [H_n, -H_n]]`, so
/// entries are exactly ±1 and the transform is exact on integers.
pub fn fwht_in_place<T>(v: &mut [T]) -> Result<()>
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let n = v.len();
    ensure!(
        n >= 1 && n.is_power_of_two(),
        Dimension,
        "fwht length {n} is not a power of two"
    );
    let mut h = 1;
    while h < n {
        for chunk in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Largest exponent accepted by [`hadamard_dense`].
pub const MAX_DENSE_HADAMARD_LOG2: u32 = 12;

/// Dense Sylvester-Hadamard matrix `H_{2^m}`. Test oracle only.
pub fn hadamard_dense(m: u32) -> Result<RealMatrix> {
    ensure!(m >= 1, Argument, "hadamard exponent must be at least 1");
    if m > MAX_DENSE_HADAMARD_LOG2 {
        return Err(Error::Resource(format!(
            "dense Hadamard of size 2^{m} exceeds the 2^{MAX_DENSE_HADAMARD_LOG2} cap"
        )));
    }
    let n = 1usize << m;
    // Entry (i, j) of the Sylvester construction is (-1)^{popcount(i & j)}.
    Ok(RealMatrix::from_fn(n, n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }))
}

/// Single entry `H[row, col]` of the Sylvester-Hadamard matrix.
pub fn hadamard_entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Circular convolution through cached forward/inverse FFT plans of one length.
pub struct CircularConvolver {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for CircularConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircularConvolver").field("len", &self.len).finish()
    }
}

impl CircularConvolver {
    pub fn new(len: usize) -> Result<Self> {
        ensure!(len >= 1, Argument, "convolution length must be at least 1");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            len,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cyclic convolution of all `factors`, written into `out`.
    pub fn convolve_all(&mut self, factors: &[&[f64]], out: &mut [f64]) -> Result<()> {
        ensure!(!factors.is_empty(), Argument, "nothing to convolve");
        ensure!(
            out.len() == self.len && factors.iter().all(|f| f.len() == self.len),
            Dimension,
            "convolution operands must all have length {}",
            self.len
        );
        if factors.len() == 1 {
            out.copy_from_slice(factors[0]);
            return Ok(());
        }
        let mut acc: Vec<Complex64> = factors[0].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process_with_scratch(&mut acc, &mut self.scratch);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for f in &factors[1..] {
            for (b, &v) in buf.iter_mut().zip(f.iter()) {
                *b = Complex64::new(v, 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut self.scratch);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a *= b;
            }
        }
        self.inverse.process_with_scratch(&mut acc, &mut self.scratch);
        let norm = 1.0 / self.len as f64;
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = a.re * norm;
        }
        Ok(())
    }
}

/// `result[k] = sum_j a[j] b[(k - j) mod D]`, computed by FFT.
pub fn circular_convolve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        a.len() == b.len(),
        Dimension,
        "circular convolution of lengths {} and {}",
        a.len(),
        b.len()
    );
    let mut conv = CircularConvolver::new(a.len())?;
    let mut out = vec![0.0; a.len()];
    conv.convolve_all(&[a, b], &mut out)?;
    Ok(out)
}

/// `scale * (b_1 ⊙ ... ⊙ b_p)`.
pub fn elementwise_product_accumulate<T: Scalar>(blocks: &[&[T]], scale: f64) -> Result<Vec<T>> {
    let (first, rest) = blocks
        .split_first()
        .ok_or_else(|| Error::Argument("at least one block is required".into()))?;
    ensure!(
        rest.iter().all(|b| b.len() == first.len()),
        Dimension,
        "all blocks must have equal length"
    );
    let mut out: Vec<T> = first.to_vec();
    for b in rest {
        for (o, &v) in out.iter_mut().zip(b.iter()) {
            *o = *o * v;
        }
    }
    for o in &mut out {
        *o = *o * scale;
    }
    Ok(out)
}
