//! Versioned binary MLP files.
//!
//! Layout (little endian): magic `MLP1`, version, output tag, layer count,
//! layer sizes, hidden dropout rates, then each layer's row-major weights and
//! biases.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{MlpModel, OutputActivation};
use crate::error::{Error, Result};
use crate::network::{Decoder, Encoder};

pub const MLP_MAGIC: &[u8; 4] = b"MLP1";
pub const MLP_FORMAT_VERSION: u32 = 1;

fn write_mlp<W: Write>(model: &MlpModel, out: W) -> Result<W> {
    let mut e = Encoder::new(out);
    e.bytes(MLP_MAGIC)?;
    e.u32(MLP_FORMAT_VERSION)?;
    e.u8(match model.output() {
        OutputActivation::Sigmoid => 0,
        OutputActivation::Linear => 1,
    })?;
    let sizes = model.sizes();
    e.len(sizes.len() - 1)?;
    for &s in &sizes {
        e.len(s)?;
    }
    e.f64s(model.dropout())?;
    for (w, b) in model.weights().iter().zip(model.biases()) {
        e.f64s(&w.iter().copied().collect::<Vec<_>>())?;
        e.f64s(b.as_slice().unwrap())?;
    }
    e.finish()
}

pub fn mlp_to_bytes(model: &MlpModel) -> Result<Vec<u8>> {
    write_mlp(model, Vec::new())
}

pub fn save_mlp(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    write_mlp(model, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn mlp_from_bytes(bytes: &[u8]) -> Result<MlpModel> {
    let mut d = Decoder::new(bytes);
    let magic = d.take(4)?;
    if magic != MLP_MAGIC {
        return Err(Error::Decode(format!("bad magic {magic:?}, expected {MLP_MAGIC:?}")));
    }
    let version = d.u32()?;
    if version != MLP_FORMAT_VERSION {
        return Err(Error::Decode(format!("unsupported MLP format version {version}")));
    }
    let output = match d.u8()? {
        0 => OutputActivation::Sigmoid,
        1 => OutputActivation::Linear,
        t => return Err(Error::Decode(format!("unknown output activation tag {t}"))),
    };
    let layers = d.len()?;
    if layers == 0 || layers > 1 << 16 {
        return Err(Error::Decode(format!("implausible layer count {layers}")));
    }
    let sizes = (0..=layers).map(|_| d.len()).collect::<Result<Vec<_>>>()?;
    let dropout = d.f64s(layers - 1)?;
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        let count = sizes[l]
            .checked_mul(sizes[l + 1])
            .ok_or_else(|| Error::Decode("layer size overflows".into()))?;
        let w = d.f64s(count)?;
        weights.push(Array2::from_shape_vec((sizes[l], sizes[l + 1]), w).map_err(|e| Error::Decode(e.to_string()))?);
        biases.push(Array1::from(d.f64s(sizes[l + 1])?));
    }
    d.expect_end()?;
    MlpModel::from_parts(weights, biases, output, dropout).map_err(|e| Error::Decode(e.to_string()))
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<MlpModel> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    mlp_from_bytes(&bytes)
}
