use std::io::{Read, Write};

use num_complex::Complex64;

use super::{FeatureData, FeatureMatrix, Family, Field};
use crate::error::{ensure, Error, Result};

pub const BINARY_MAGIC: [u8; 4] = *b"PSK1";

fn field_tag(field: Field) -> u32 {
    match field {
        Field::Real => 0,
        Field::Complex => 1,
        Field::Ctr => 2,
    }
}

/// Row-major `rows × n` CSV. Header lines start with `#`; complex entries
/// occupy two columns `re,im`.
pub fn write_csv<W: Write>(f: &FeatureMatrix, mut w: W) -> Result<()> {
    let spec = f.spec();
    writeln!(w, "# family={}", spec.family)?;
    writeln!(w, "# field={}", spec.field)?;
    writeln!(w, "# degree={}", spec.degree)?;
    writeln!(w, "# output_dim={}", spec.output_dim)?;
    writeln!(w, "# seed={}", spec.seed)?;
    writeln!(w, "# input_dim={}", f.input_dim())?;
    if spec.family == Family::ProductSrht {
        writeln!(w, "# padded_dim={}", f.input_dim().next_power_of_two())?;
    }
    writeln!(w, "# rows={} cols={}", f.rows(), f.cols())?;
    let mut line = String::new();
    for i in 0..f.rows() {
        line.clear();
        for j in 0..f.cols() {
            if j > 0 {
                line.push(',');
            }
            let z = f.get(i, j);
            if f.is_complex() {
                line.push_str(&format!("{:.16e},{:.16e}", z.re, z.im));
            } else {
                line.push_str(&format!("{:.16e}", z.re));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Header `magic, rows, cols, field tag` (u32 LE each) followed by row-major
/// little-endian doubles; complex entries are stored as `re, im` pairs.
pub fn write_binary<W: Write>(f: &FeatureMatrix, mut w: W) -> Result<()> {
    let rows = u32::try_from(f.rows()).map_err(|_| Error::Resource("too many rows".into()))?;
    let cols = u32::try_from(f.cols()).map_err(|_| Error::Resource("too many columns".into()))?;
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    w.write_all(&field_tag(f.spec().field).to_le_bytes())?;
    for i in 0..f.rows() {
        for j in 0..f.cols() {
            let z = f.get(i, j);
            w.write_all(&z.re.to_le_bytes())?;
            if f.is_complex() {
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Decoded binary dump: `values` is row-major, real or complex.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFeatures {
    pub rows: usize,
    pub cols: usize,
    pub field: Field,
    pub values: FeatureData,
}

pub fn read_binary<R: Read>(mut r: R) -> Result<BinaryFeatures> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    ensure!(header[..4] == BINARY_MAGIC, Validation, "bad magic in feature dump");
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let (rows, cols) = (word(4) as usize, word(8) as usize);
    let field = match word(12) {
        0 => Field::Real,
        1 => Field::Complex,
        2 => Field::Ctr,
        t => return Err(Error::Validation(format!("unknown field tag {t}"))),
    };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let per = if field == Field::Complex { 2 } else { 1 };
    ensure!(
        bytes.len() == rows * cols * per * 8,
        Validation,
        "feature dump has {} payload bytes, expected {}",
        bytes.len(),
        rows * cols * per * 8
    );
    let doubles: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let values = if field == Field::Complex {
        FeatureData::Complex(doubles.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
    } else {
        FeatureData::Real(doubles)
    };
    Ok(BinaryFeatures {
        rows,
        cols,
        field,
        values,
    })
}
