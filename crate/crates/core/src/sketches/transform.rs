use num_complex::Complex64;
use rayon::prelude::*;

use super::{FeatureData, FeatureMatrix, Field, Gram, SketchBlocks, SketchState};
use crate::error::Result;
use crate::linalg::{
    complex_flat, fwht_in_place, gemm, CircularConvolver, ComplexMatrix, RealMatrix, View,
};
use crate::randomness::{CountSketchHashes, SignDiagonal, SrhtBlock, WeightMatrix};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Raw (unscaled) block product per point, before packing.
enum Raw {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

pub(super) fn transform(state: &SketchState, x: &RealMatrix) -> Result<FeatureMatrix> {
    let spec = state.spec;
    let n = x.rows();
    let rows = spec.block_rows();
    let raw = match &state.blocks {
        SketchBlocks::Dense(ws) => dense(ws, x, rows),
        SketchBlocks::Srht { padded, blocks } => srht(blocks, x, rows, padded.padded_d),
        SketchBlocks::TensorSketch(hashes) => tensorsketch(hashes, x, spec.output_dim)?,
    };
    let scale = if matches!(state.blocks, SketchBlocks::TensorSketch(_)) {
        1.0
    } else {
        spec.feature_scale()
    };
    let (out_rows, data) = match (raw, spec.field) {
        (Raw::Real(mut v), _) => {
            v.iter_mut().for_each(|a| *a *= scale);
            (rows, FeatureData::Real(v))
        }
        (Raw::Complex(mut v), Field::Complex) => {
            v.iter_mut().for_each(|a| *a *= scale);
            (rows, FeatureData::Complex(v))
        }
        (Raw::Complex(v), _) => {
            let mut out = vec![0.0; 2 * rows * n];
            for (col, z) in out.chunks_mut(2 * rows).zip(v.chunks(rows.max(1))) {
                let (re, im) = col.split_at_mut(rows);
                for l in 0..rows {
                    re[l] = z[l].re * scale;
                    im[l] = z[l].im * scale;
                }
            }
            (2 * rows, FeatureData::Real(out))
        }
    };
    Ok(FeatureMatrix::new(spec, state.input_dim, out_rows, n, data))
}

/// `W X^T` for every block, multiplied together; column-major `rows × n`.
fn dense(ws: &[WeightMatrix], x: &RealMatrix, rows: usize) -> Raw {
    let (n, d) = x.shape();
    let xt = View::new(x.as_slice(), 0, 1, d as isize);
    let mut buf = vec![0.0; rows * n];
    match &ws[0] {
        WeightMatrix::Real(_) => {
            let mut acc = vec![1.0; rows * n];
            for w in ws {
                let WeightMatrix::Real(w) = w else { unreachable!() };
                gemm(rows, d, n, View::new(w.as_slice(), 0, d as isize, 1), xt, &mut buf, 1, rows as isize);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a *= b);
            }
            Raw::Real(acc)
        }
        WeightMatrix::Complex(_) => {
            let mut acc = vec![Complex64::new(1.0, 0.0); rows * n];
            let mut buf_im = vec![0.0; rows * n];
            for w in ws {
                let WeightMatrix::Complex(w) = w else { unreachable!() };
                let data = w.as_slice();
                gemm(rows, d, n, View::complex_plane(data, d, 0), xt, &mut buf, 1, rows as isize);
                gemm(rows, d, n, View::complex_plane(data, d, 1), xt, &mut buf_im, 1, rows as isize);
                for ((a, &re), &im) in acc.iter_mut().zip(&buf).zip(&buf_im) {
                    *a *= Complex64::new(re, im);
                }
            }
            Raw::Complex(acc)
        }
    }
}

fn srht(blocks: &[SrhtBlock], x: &RealMatrix, rows: usize, padded_d: usize) -> Raw {
    let n = x.rows();
    match &blocks[0].diag {
        SignDiagonal::Real(_) => {
            let mut out = vec![1.0; rows * n];
            out.par_chunks_mut(rows)
                .enumerate()
                .for_each_init(
                    || vec![0.0; padded_d],
                    |buf, (j, col)| {
                        for b in blocks {
                            let SignDiagonal::Real(diag) = &b.diag else { unreachable!() };
                            buf.fill(0.0);
                            for (q, &v) in x.row(j).iter().enumerate() {
                                buf[q] = diag[q] * v;
                            }
                            fwht_in_place(buf).expect("padded length is a power of two");
                            for (c, &r) in col.iter_mut().zip(&b.row_indices) {
                                *c *= buf[r];
                            }
                        }
                    },
                );
            Raw::Real(out)
        }
        SignDiagonal::Complex(_) => {
            let mut out = vec![Complex64::new(1.0, 0.0); rows * n];
            out.par_chunks_mut(rows)
                .enumerate()
                .for_each_init(
                    || (vec![0.0; padded_d], vec![0.0; padded_d]),
                    |(re, im), (j, col)| {
                        for b in blocks {
                            let SignDiagonal::Complex(diag) = &b.diag else { unreachable!() };
                            re.fill(0.0);
                            im.fill(0.0);
                            for (q, &v) in x.row(j).iter().enumerate() {
                                re[q] = diag[q].re * v;
                                im[q] = diag[q].im * v;
                            }
                            fwht_in_place(re).expect("padded length is a power of two");
                            fwht_in_place(im).expect("padded length is a power of two");
                            for (c, &r) in col.iter_mut().zip(&b.row_indices) {
                                *c *= Complex64::new(re[r], im[r]);
                            }
                        }
                    },
                );
            Raw::Complex(out)
        }
    }
}

fn tensorsketch(hashes: &[CountSketchHashes], x: &RealMatrix, dim: usize) -> Result<Raw> {
    let n = x.rows();
    let mut out = vec![0.0; dim * n];
    CircularConvolver::new(dim)?;
    out.par_chunks_mut(dim)
        .enumerate()
        .for_each_init(
            || {
                (
                    CircularConvolver::new(dim).expect("length checked above"),
                    vec![vec![0.0; dim]; hashes.len()],
                )
            },
            |(conv, sketches), (j, col)| {
                for (h, c) in hashes.iter().zip(sketches.iter_mut()) {
                    c.fill(0.0);
                    for (q, &v) in x.row(j).iter().enumerate() {
                        c[h.index_map[q]] += h.sign_map[q] * v;
                    }
                }
                let factors: Vec<&[f64]> = sketches.iter().map(|c| c.as_slice()).collect();
                conv.convolve_all(&factors, col).expect("operand lengths match");
            },
        );
    Ok(Raw::Real(out))
}

pub(super) fn estimate_pair(state: &SketchState, x: &[f64], y: &[f64]) -> Result<Complex64> {
    let mut data = Vec::with_capacity(2 * x.len());
    data.extend_from_slice(x);
    data.extend_from_slice(y);
    let f = transform(state, &RealMatrix::from_vec(2, x.len(), data)?)?;
    Ok(match f.data() {
        FeatureData::Real(v) => {
            let (a, b) = v.split_at(f.rows());
            Complex64::new(a.iter().zip(b).map(|(a, b)| a * b).sum(), 0.0)
        }
        FeatureData::Complex(v) => {
            let (a, b) = v.split_at(f.rows());
            a.iter().zip(b).fold(C0, |s, (a, b)| s + a * b.conj())
        }
    })
}

pub(super) fn gram(fx: &FeatureMatrix, fy: &FeatureMatrix) -> Result<Gram> {
    let (k, nx, ny) = (fx.rows(), fx.cols(), fy.cols());
    let (ki, kx) = (k as isize, k as isize);
    Ok(match (fx.data(), fy.data()) {
        (FeatureData::Real(a), FeatureData::Real(b)) => {
            let mut out = vec![0.0; nx * ny];
            gemm(nx, k, ny, View::new(a, 0, ki, 1), View::new(b, 0, 1, kx), &mut out, ny as isize, 1);
            Gram::Real(RealMatrix::from_vec(nx, ny, out)?)
        }
        (FeatureData::Complex(a), FeatureData::Complex(b)) => {
            let (fa, fb) = (complex_flat(a), complex_flat(b));
            let av = |part| View::new(fa, part, 2 * ki, 2);
            let bv = |part| View::new(fb, part, 2, 2 * kx);
            let mut prods = [
                vec![0.0; nx * ny],
                vec![0.0; nx * ny],
                vec![0.0; nx * ny],
                vec![0.0; nx * ny],
            ];
            for (idx, (pa, pb)) in [(0, 0), (1, 1), (1, 0), (0, 1)].into_iter().enumerate() {
                gemm(nx, k, ny, av(pa), bv(pb), &mut prods[idx], ny as isize, 1);
            }
            let data = (0..nx * ny)
                .map(|i| Complex64::new(prods[0][i] + prods[1][i], prods[2][i] - prods[3][i]))
                .collect();
            Gram::Complex(ComplexMatrix::from_vec(nx, ny, data)?)
        }
        _ => unreachable!("features of one spec share a field"),
    })
}
