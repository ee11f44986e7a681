//! Binary and CSV containers for complex matrices and vectors.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! | offset | size | field                                              |
//! |--------|------|----------------------------------------------------|
//! | 0      | 8    | magic `EMSCMPLX`                                   |
//! | 8      | 4    | format version (`1`)                               |
//! | 12     | 4    | bytes per element: `8` (complex64) or `16` (complex128) |
//! | 16     | 8    | rows                                               |
//! | 24     | 8    | columns                                            |
//! | 32     | 8    | row blocks (transmitter count for operators, else 1) |
//! | 40     | ...  | entries in column-major order, each `re` then `im` |
//!
//! CSV twins use the header `row,col,re,im` with shortest round-trip
//! decimal formatting.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::ScatteringOperator;

pub const MAGIC: &[u8; 8] = b"EMSCMPLX";
pub const VERSION: u32 = 1;

/// Storage precision of the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Complex64,
    Complex128,
}

impl Precision {
    fn width(self) -> u32 {
        match self {
            Precision::Complex64 => 8,
            Precision::Complex128 => 16,
        }
    }
}

/// A complex matrix plus its row-block count.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexArray {
    pub matrix: DMatrix<Complex64>,
    pub blocks: usize,
}

pub fn write_complex<W: Write>(mut w: W, array: &ComplexArray, precision: Precision) -> std::io::Result<()> {
    let m = &array.matrix;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&precision.width().to_le_bytes())?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    w.write_all(&(array.blocks as u64).to_le_bytes())?;
    for z in m.iter() {
        match precision {
            Precision::Complex64 => {
                w.write_all(&(z.re as f32).to_le_bytes())?;
                w.write_all(&(z.im as f32).to_le_bytes())?;
            }
            Precision::Complex128 => {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_complex<R: Read>(mut r: R) -> Result<ComplexArray> {
    let bad = |reason: &str| Error::format("complex container", reason);
    let mut header = [0u8; 40];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    if &header[0..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    if u32_at(8) != VERSION {
        return Err(bad("unsupported version"));
    }
    let width = u32_at(12);
    let (rows, cols, blocks) = (u64_at(16) as usize, u64_at(24) as usize, u64_at(32) as usize);
    let count = rows.checked_mul(cols).ok_or_else(|| bad("shape overflow"))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|_| bad("unreadable payload"))?;
    if payload.len() != count * width as usize {
        return Err(bad("payload length does not match shape"));
    }
    let data: Vec<Complex64> = match width {
        8 => payload
            .chunks_exact(8)
            .map(|c| {
                Complex64::new(
                    f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64,
                )
            })
            .collect(),
        16 => payload
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect(),
        _ => return Err(bad("element width must be 8 or 16")),
    };
    Ok(ComplexArray {
        matrix: DMatrix::from_vec(rows, cols, data),
        blocks,
    })
}

pub fn save_complex(path: &Path, array: &ComplexArray, precision: Precision) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_complex(&mut w, array, precision).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_complex(path: &Path) -> Result<ComplexArray> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_complex(BufReader::new(f))
}

pub fn save_operator(path: &Path, op: &ScatteringOperator) -> Result<()> {
    let array = ComplexArray {
        matrix: op.matrix().clone(),
        blocks: op.n_transmitters(),
    };
    save_complex(path, &array, Precision::Complex128)
}

pub fn load_operator(path: &Path) -> Result<ScatteringOperator> {
    let a = load_complex(path)?;
    if a.blocks == 0 || a.matrix.nrows() % a.blocks != 0 {
        return Err(Error::format(
            "operator file",
            "row count is not a multiple of the transmitter count",
        ));
    }
    let nr = a.matrix.nrows() / a.blocks;
    ScatteringOperator::from_matrix(a.matrix, a.blocks, nr)
}

pub fn vector_array(v: &DVector<Complex64>) -> ComplexArray {
    ComplexArray {
        matrix: DMatrix::from_column_slice(v.len(), 1, v.as_slice()),
        blocks: 1,
    }
}

pub fn write_complex_csv<W: Write>(mut w: W, m: &DMatrix<Complex64>) -> std::io::Result<()> {
    writeln!(w, "row,col,re,im")?;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            writeln!(w, "{r},{c},{},{}", z.re, z.im)?;
        }
    }
    Ok(())
}

pub fn read_complex_csv<R: Read>(r: R) -> Result<DMatrix<Complex64>> {
    let bad = |reason: String| Error::format("complex csv", reason);
    let mut entries = Vec::new();
    let (mut rows, mut cols) = (0usize, 0usize);
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if i == 0 {
            if line.trim() != "row,col,re,im" {
                return Err(bad("missing header".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(format!("line {}: expected 4 fields", i + 1)));
        }
        let parse_u = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("line {}: {e}", i + 1)));
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 1)));
        let (r, c) = (parse_u(f[0])?, parse_u(f[1])?);
        rows = rows.max(r + 1);
        cols = cols.max(c + 1);
        entries.push((r, c, Complex64::new(parse_f(f[2])?, parse_f(f[3])?)));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (r, c, z) in entries {
        m[(r, c)] = z;
    }
    Ok(m)
}

pub fn save_complex_csv(path: &Path, m: &DMatrix<Complex64>) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_complex_csv(&mut w, m).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
