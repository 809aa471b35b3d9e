//! Binary and JSON formats.
//!
//! Matrices: 16-byte header "RLAB", u32 rows, u32 cols, u32 ext, then
//! row-major little-endian f64 (re, im) pairs. `ext` is 0 for a plain
//! matrix, the number of components per point for a field (stored as a
//! column) and the block count for a stack of Fourier blocks (stored as
//! rows = count·m, cols = m).
//!
//! Phase rasters: "CHI0", u32 d, u32 N, then N^d bytes in {0, 1}.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::linalg::{CMat, C64};

const MATRIX_MAGIC: &[u8; 4] = b"RLAB";
const RASTER_MAGIC: &[u8; 4] = b"CHI0";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_magic<R: Read>(r: &mut R, expect: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != expect {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(expect),
            String::from_utf8_lossy(&m)
        )));
    }
    Ok(())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

fn write_raw<W: Write>(w: &mut W, m: &CMat, ext: u32) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&to_u32(m.nrows(), "rows")?.to_le_bytes())?;
    w.write_all(&to_u32(m.ncols(), "cols")?.to_le_bytes())?;
    w.write_all(&ext.to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_raw<R: Read>(r: &mut R) -> Result<(CMat, u32)> {
    read_magic(r, MATRIX_MAGIC)?;
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    let ext = read_u32(r)?;
    let count = rows.checked_mul(cols).ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    let mut buf = vec![0u8; count.checked_mul(16).ok_or_else(|| Error::Format("matrix size overflows".into()))?];
    r.read_exact(&mut buf)?;
    let vals: Vec<C64> = buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    Ok((CMat::from_row_slice(rows, cols, &vals), ext))
}

pub fn write_matrix<W: Write>(w: &mut W, m: &CMat) -> Result<()> {
    write_raw(w, m, 0)
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<CMat> {
    Ok(read_raw(r)?.0)
}

pub fn write_field<W: Write>(w: &mut W, f: &ComplexField) -> Result<()> {
    let col = CMat::from_column_slice(f.len(), 1, &f.values);
    write_raw(w, &col, to_u32(f.components, "components")?)
}

pub fn read_field<R: Read>(r: &mut R, cell_volume: f64) -> Result<ComplexField> {
    let (m, ext) = read_raw(r)?;
    if m.ncols() != 1 || ext == 0 {
        return Err(Error::Format("not a field snapshot".into()));
    }
    ComplexField::new(m.iter().copied().collect(), ext as usize, cell_volume)
}

/// Writes per-frequency blocks, all m×m, in index order.
pub fn write_block_stack<W: Write>(w: &mut W, blocks: &[CMat]) -> Result<()> {
    let m = blocks.first().map_or(0, |b| b.nrows());
    let mut stacked = CMat::zeros(blocks.len() * m, m);
    for (k, b) in blocks.iter().enumerate() {
        if b.shape() != (m, m) {
            return Err(Error::ShapeMismatch { expected: m, got: b.nrows() });
        }
        stacked.view_mut((k * m, 0), (m, m)).copy_from(b);
    }
    write_raw(w, &stacked, to_u32(blocks.len(), "block count")?)
}

pub fn read_block_stack<R: Read>(r: &mut R) -> Result<Vec<CMat>> {
    let (m, count) = read_raw(r)?;
    let count = count as usize;
    let size = m.ncols();
    if count == 0 || m.nrows() != count * size {
        return Err(Error::Format(format!("{}×{} is not a stack of {count} square blocks", m.nrows(), size)));
    }
    Ok((0..count).map(|k| m.rows(k * size, size).into_owned()).collect())
}

pub fn write_raster<W: Write>(w: &mut W, d: usize, n: usize, chi: &[u8]) -> Result<()> {
    if chi.len() != n.pow(d as u32) {
        return Err(Error::ShapeMismatch { expected: n.pow(d as u32), got: chi.len() });
    }
    w.write_all(RASTER_MAGIC)?;
    w.write_all(&to_u32(d, "dimension")?.to_le_bytes())?;
    w.write_all(&to_u32(n, "side")?.to_le_bytes())?;
    w.write_all(chi)?;
    Ok(())
}

/// Returns (d, N, χ).
pub fn read_raster<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<u8>)> {
    read_magic(r, RASTER_MAGIC)?;
    let d = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    if d == 0 || d > 3 {
        return Err(Error::Format(format!("raster dimension {d} outside 1..=3")));
    }
    let len = n.checked_pow(d as u32).ok_or_else(|| Error::Format("raster size overflows".into()))?;
    let mut chi = vec![0u8; len];
    r.read_exact(&mut chi)?;
    if let Some(bad) = chi.iter().position(|&c| c > 1) {
        return Err(Error::Format(format!("raster value {} at {bad} is not 0 or 1", chi[bad])));
    }
    Ok((d, n, chi))
}

pub fn save_matrix(path: &Path, m: &CMat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, m)?;
    Ok(w.flush()?)
}

pub fn load_matrix(path: &Path) -> Result<CMat> {
    read_matrix(&mut BufReader::new(File::open(path)?))
}

pub fn save_field(path: &Path, f: &ComplexField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    Ok(w.flush()?)
}

pub fn load_block_stack(path: &Path) -> Result<Vec<CMat>> {
    read_block_stack(&mut BufReader::new(File::open(path)?))
}

pub fn load_raster(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    read_raster(&mut BufReader::new(File::open(path)?))
}

/// Nested arrays of [re, im].
pub fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect())).collect(),
    )
}

pub fn complex_to_json(z: C64) -> Value {
    serde_json::json!([z.re, z.im])
}

fn complex_from_json(v: &Value) -> Result<C64> {
    match v {
        Value::Number(n) => Ok(C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(a) if a.len() == 2 => match (a[0].as_f64(), a[1].as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => Err(Error::Format(format!("bad complex entry {v}"))),
        },
        _ => Err(Error::Format(format!("bad complex entry {v}"))),
    }
}

/// Accepts nested arrays whose entries are real numbers or [re, im] pairs.
pub fn matrix_from_json(v: &Value) -> Result<CMat> {
    let rows = v.as_array().ok_or_else(|| Error::Format("matrix must be an array of rows".into()))?;
    let cols = rows.first().and_then(Value::as_array).map_or(0, Vec::len);
    let mut out = CMat::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| Error::Format("matrix row must be an array".into()))?;
        if row.len() != cols {
            return Err(Error::Format("ragged matrix".into()));
        }
        for (j, e) in row.iter().enumerate() {
            out[(i, j)] = complex_from_json(e)?;
        }
    }
    Ok(out)
}

pub fn complex_value_from_json(v: &Value) -> Result<C64> {
    complex_from_json(v)
}
