//! Model file layout (little-endian):
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 8    | magic `EMSMLP01`                             |
//! | 8      | 4    | format version                               |
//! | 12     | 16   | dims: input, hidden 1, hidden 2, output (`u32`) |
//! | 28     | 8    | feature scale (`f64`, NaN when unset)        |
//! | 36     | 8    | initialisation / training seed               |
//! | 44     | 32   | training dataset hash (zeros when unknown)   |
//! | 76     | ...  | `W1` row-major, `b1`, `W2`, `b2`, `W3`, `b3` as `f64` |

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{Dense, MlpModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"EMSMLP01";
pub const MODEL_VERSION: u32 = 1;
const HEADER: usize = 76;

fn hash_bytes(hex: &str) -> Result<[u8; 32]> {
    let mut out = [0u8; 32];
    if hex.is_empty() {
        return Ok(out);
    }
    if hex.len() != 64 {
        return Err(Error::invalid("dataset hash must be 64 hex digits"));
    }
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|e| Error::invalid(e.to_string()))?;
    }
    Ok(out)
}

pub fn write_model<W: Write>(mut w: W, model: &MlpModel) -> Result<()> {
    let io = |e: std::io::Error| Error::format("model file", e);
    let hash = hash_bytes(&model.spec_hash)?;
    let mut b = Vec::with_capacity(HEADER);
    b.extend_from_slice(MODEL_MAGIC);
    b.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for d in model.dims() {
        b.extend_from_slice(&(d as u32).to_le_bytes());
    }
    b.extend_from_slice(&model.feature_scale.unwrap_or(f64::NAN).to_le_bytes());
    b.extend_from_slice(&model.seed.to_le_bytes());
    b.extend_from_slice(&hash);
    for l in &model.layers {
        for v in l.weights.iter().chain(l.bias.iter()) {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&b).map_err(io)
}

pub fn read_model<R: Read>(mut r: R) -> Result<MlpModel> {
    let bad = |reason: &str| Error::format("model file", reason);
    let mut b = Vec::new();
    r.read_to_end(&mut b).map_err(|e| Error::format("model file", e))?;
    if b.len() < HEADER || &b[0..8] != MODEL_MAGIC {
        return Err(bad("bad magic or truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
    if u32_at(8) != MODEL_VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let dims = [u32_at(12), u32_at(16), u32_at(20), u32_at(24)];
    let scale = f64::from_le_bytes(b[28..36].try_into().unwrap());
    let seed = u64::from_le_bytes(b[36..44].try_into().unwrap());
    let hash = &b[44..76];
    let n_params: usize = (0..3).map(|i| dims[i + 1] * (dims[i] + 1)).sum();
    if b.len() != HEADER + 8 * n_params {
        return Err(bad("parameter payload does not match the stored dimensions"));
    }
    let mut values = b[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let mut layer = |i: usize| -> Result<Dense> {
        let (inp, out) = (dims[i], dims[i + 1]);
        let weights = Array2::from_shape_vec((out, inp), take(out * inp)).map_err(|e| bad(&e.to_string()))?;
        Ok(Dense {
            weights,
            bias: Array1::from(take(out)),
        })
    };
    let layers = [layer(0)?, layer(1)?, layer(2)?];
    let mut model = MlpModel::from_layers(layers)?;
    model.feature_scale = if scale.is_nan() { None } else { Some(scale) };
    model.seed = seed;
    model.spec_hash = if hash.iter().all(|x| *x == 0) {
        String::new()
    } else {
        hash.iter().map(|x| format!("{x:02x}")).collect()
    };
    Ok(model)
}

pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, model)?;
    crate::io::write_file(path, &buf)
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(f))
}
