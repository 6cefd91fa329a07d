//! Binary model files.
//!
//! Little-endian throughout: the magic `MBN1`, a `u32` format version, the
//! schedule record, then every layer (center pool followed by each
//! clustering's feature bitmap and center rows), then the PCA head.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, WriteBytesExt};
use serde_json::json;

use super::clustering::{ClusteringModel, FeatureSet, Similarity};
use super::layer::{CenterPool, LayerModel};
use super::model::{NetworkModel, ScheduleRecord, FORMAT_VERSION};
use crate::data::{CodeMatrix, DataMatrix, Storage};
use crate::error::{Error, Result};
use crate::pca::PcaModel;

pub const MAGIC: &[u8; 4] = b"MBN1";

const POOL_DENSE: u8 = 0;
const POOL_SPARSE: u8 = 1;
const POOL_CODES: u8 = 2;

/// Appends little-endian primitives to a writer.
pub(crate) struct Encoder<W: Write> {
    inner: W,
}

impl<W: Write> Encoder<W> {
    pub(crate) fn new(inner: W) -> Self {
        Self { inner }
    }

    pub(crate) fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.inner.write_all(b)?)
    }

    pub(crate) fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.inner.write_u8(v)?)
    }

    pub(crate) fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.inner.write_u32::<LE>(v)?)
    }

    pub(crate) fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.inner.write_u64::<LE>(v)?)
    }

    pub(crate) fn len(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }

    pub(crate) fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.inner.write_f64::<LE>(v)?)
    }

    pub(crate) fn f64s(&mut self, v: &[f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(v.len() * 8);
        v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        self.bytes(&buf)
    }

    pub(crate) fn u32s(&mut self, v: &[u32]) -> Result<()> {
        let mut buf = Vec::with_capacity(v.len() * 4);
        v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        self.bytes(&buf)
    }

    pub(crate) fn u64s(&mut self, v: &[u64]) -> Result<()> {
        let mut buf = Vec::with_capacity(v.len() * 8);
        v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        self.bytes(&buf)
    }

    pub(crate) fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Bounds-checked reader over an in-memory file.
pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Decode(format!("truncated file at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Decode("length overflows usize".into()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn array_bytes(&mut self, count: usize, width: usize) -> Result<&'a [u8]> {
        let n = count
            .checked_mul(width)
            .ok_or_else(|| Error::Decode("array length overflows".into()))?;
        self.take(n)
    }

    pub(crate) fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        Ok(self
            .array_bytes(count, 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn u32s(&mut self, count: usize) -> Result<Vec<u32>> {
        Ok(self
            .array_bytes(count, 4)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn u64s(&mut self, count: usize) -> Result<Vec<u64>> {
        Ok(self
            .array_bytes(count, 8)?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Decode(format!(
                "{} trailing bytes after the model",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn similarity_tag(s: Similarity) -> u8 {
    match s {
        Similarity::SquaredEuclidean => 0,
        Similarity::DotProduct => 1,
    }
}

fn similarity_from_tag(t: u8) -> Result<Similarity> {
    match t {
        0 => Ok(Similarity::SquaredEuclidean),
        1 => Ok(Similarity::DotProduct),
        _ => Err(Error::Decode(format!("unknown similarity tag {t}"))),
    }
}

/// Serializes a model into `out`.
pub fn write_model<W: Write>(model: &NetworkModel, out: W) -> Result<W> {
    let mut e = Encoder::new(out);
    e.bytes(MAGIC)?;
    e.u32(FORMAT_VERSION)?;

    let s = &model.schedule;
    e.len(s.ks.len())?;
    for &k in &s.ks {
        e.len(k)?;
    }
    e.f64(s.delta)?;
    e.len(s.v)?;
    e.f64(s.a)?;
    e.u8(similarity_tag(s.similarity))?;
    e.u64(s.seed)?;

    e.len(model.layers.len())?;
    for layer in &model.layers {
        e.len(layer.layer_index())?;
        e.f64(layer.a())?;
        e.u8(similarity_tag(layer.similarity()))?;
        match layer.pool() {
            CenterPool::Data(m) => match m.storage() {
                Storage::Dense(v) => {
                    e.u8(POOL_DENSE)?;
                    e.len(m.n())?;
                    e.len(m.d())?;
                    e.f64s(v)?;
                }
                Storage::Sparse {
                    indptr,
                    indices,
                    values,
                } => {
                    e.u8(POOL_SPARSE)?;
                    e.len(m.n())?;
                    e.len(m.d())?;
                    e.len(indices.len())?;
                    e.u64s(&indptr.iter().map(|&p| p as u64).collect::<Vec<_>>())?;
                    e.u32s(indices)?;
                    e.f64s(values)?;
                }
            },
            CenterPool::Codes(c) => {
                e.u8(POOL_CODES)?;
                e.len(c.n())?;
                e.len(c.v())?;
                e.len(c.k())?;
                e.u32s(c.winners())?;
            }
        }
        e.len(layer.v())?;
        for c in layer.clusterings() {
            e.len(c.features.dim())?;
            e.u64s(c.features.words())?;
            e.len(c.k())?;
            e.u32s(&c.centers)?;
        }
    }

    let pca = &model.pca;
    e.len(pca.d())?;
    e.len(pca.p())?;
    e.f64s(pca.mean())?;
    e.f64s(pca.basis())?;
    e.f64s(pca.variances())?;
    e.finish()
}

/// Serializes a model to bytes.
pub fn model_to_bytes(model: &NetworkModel) -> Result<Vec<u8>> {
    write_model(model, Vec::new())
}

pub fn save_model(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_model(model, BufWriter::new(file))?;
    Ok(())
}

/// Parses a model; any structural problem is a [`Error::Decode`].
pub fn model_from_bytes(bytes: &[u8]) -> Result<NetworkModel> {
    let mut d = Decoder::new(bytes);
    let magic = d.take(4).map_err(|_| Error::Decode("file too short for a model header".into()))?;
    if magic != MAGIC {
        return Err(Error::Decode(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = d.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Decode(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }

    let depth = d.len()?;
    let mut ks = Vec::with_capacity(depth.min(1024));
    for _ in 0..depth {
        ks.push(d.len()?);
    }
    let schedule = ScheduleRecord {
        ks,
        delta: d.f64()?,
        v: d.len()?,
        a: d.f64()?,
        similarity: similarity_from_tag(d.u8()?)?,
        seed: d.u64()?,
    };

    let n_layers = d.len()?;
    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let layer_index = d.len()?;
        let a = d.f64()?;
        let similarity = similarity_from_tag(d.u8()?)?;
        let pool = match d.u8()? {
            POOL_DENSE => {
                let (n, dim) = (d.len()?, d.len()?);
                let count = n
                    .checked_mul(dim)
                    .ok_or_else(|| Error::Decode("pool size overflows".into()))?;
                CenterPool::Data(DataMatrix::dense(n, dim, d.f64s(count)?)?)
            }
            POOL_SPARSE => {
                let (n, dim, nnz) = (d.len()?, d.len()?, d.len()?);
                let indptr = d
                    .u64s(n.checked_add(1).ok_or_else(|| Error::Decode("pool size overflows".into()))?)?
                    .into_iter()
                    .map(|p| p as usize)
                    .collect();
                let indices = d.u32s(nnz)?;
                let values = d.f64s(nnz)?;
                CenterPool::Data(
                    DataMatrix::sparse(n, dim, indptr, indices, values)
                        .map_err(|e| Error::Decode(e.to_string()))?,
                )
            }
            POOL_CODES => {
                let (n, v, k) = (d.len()?, d.len()?, d.len()?);
                let count = n
                    .checked_mul(v)
                    .ok_or_else(|| Error::Decode("pool size overflows".into()))?;
                CenterPool::Codes(
                    CodeMatrix::new(n, v, k, d.u32s(count)?).map_err(|e| Error::Decode(e.to_string()))?,
                )
            }
            t => return Err(Error::Decode(format!("unknown pool tag {t}"))),
        };
        let v = d.len()?;
        let mut clusterings = Vec::with_capacity(v.min(1 << 16));
        for _ in 0..v {
            let dim = d.len()?;
            let words = d.u64s(dim.div_ceil(64))?;
            let features = FeatureSet::from_words(dim, words)?;
            let k = d.len()?;
            let centers = d.u32s(k)?;
            clusterings.push(ClusteringModel { features, centers });
        }
        layers.push(
            LayerModel::new(layer_index, a, similarity, clusterings, pool)
                .map_err(|e| Error::Decode(e.to_string()))?,
        );
    }

    let (dim, p) = (d.len()?, d.len()?);
    let mean = d.f64s(dim)?;
    let basis = d.f64s(dim.checked_mul(p).ok_or_else(|| Error::Decode("basis size overflows".into()))?)?;
    let variances = d.f64s(p)?;
    d.expect_end()?;
    let pca = PcaModel::new(mean, basis, variances)?;
    NetworkModel::new(schedule, layers, pca).map_err(|e| Error::Decode(e.to_string()))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    model_from_bytes(&bytes)
}

/// Human-readable summary of a model's structure.
pub fn model_summary_json(model: &NetworkModel) -> serde_json::Value {
    let layers: Vec<_> = model
        .layers
        .iter()
        .map(|l| {
            json!({
                "layer": l.layer_index() + 1,
                "k": l.k(),
                "v": l.v(),
                "a": l.a(),
                "similarity": l.similarity(),
                "input_dim": l.input_dim(),
                "selected_features": l.clusterings().first().map_or(0, |c| c.features.len()),
                "pooled_centers": l.pool().rows(),
            })
        })
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "depth": model.layers.len(),
        "schedule": model.schedule,
        "layers": layers,
        "pca": {
            "input_dim": model.pca.d(),
            "output_dim": model.pca.p(),
            "variances": model.pca.variances(),
        },
    })
}
