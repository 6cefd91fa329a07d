use rayon::prelude::*;

use super::clustering::{encode_clustering, train_clustering, ClusteringModel, Input, Similarity};
use crate::data::{CodeMatrix, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;

/// Rows of a layer's training input that serve as centers in at least one clustering.
#[derive(Debug, Clone, PartialEq)]
pub enum CenterPool {
    Data(DataMatrix),
    Codes(CodeMatrix),
}

impl CenterPool {
    pub fn as_input(&self) -> Input<'_> {
        match self {
            CenterPool::Data(m) => Input::Data(m),
            CenterPool::Codes(c) => Input::Codes(c),
        }
    }

    pub fn rows(&self) -> usize {
        self.as_input().n()
    }
}

/// One hidden layer: `V` independent k-centers clusterings sharing `k`.
///
/// Centers are stored once, in `pool`; each clustering refers to pool rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerModel {
    layer_index: usize,
    k: usize,
    a: f64,
    similarity: Similarity,
    clusterings: Vec<ClusteringModel>,
    pool: CenterPool,
}

impl LayerModel {
    /// Validates and assembles a layer whose clusterings index rows of `pool`.
    pub fn new(
        layer_index: usize,
        a: f64,
        similarity: Similarity,
        clusterings: Vec<ClusteringModel>,
        pool: CenterPool,
    ) -> Result<Self> {
        let k = clusterings
            .first()
            .map(ClusteringModel::k)
            .ok_or_else(|| invalid("a layer needs at least one clustering"))?;
        if let Some(bad) = clusterings.iter().find(|c| c.k() != k) {
            return Err(invalid(format!(
                "all clusterings of a layer must share k: found {} and {k}",
                bad.k()
            )));
        }
        let dim = pool.as_input().dim();
        let rows = pool.rows();
        for c in &clusterings {
            if c.features.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.features.dim(),
                });
            }
            if c.centers.iter().any(|&r| r as usize >= rows) {
                return Err(invalid("center refers past the end of the pool"));
            }
        }
        if matches!(pool, CenterPool::Codes(_)) && similarity != Similarity::DotProduct {
            return Err(invalid("upper layers use dot-product similarity"));
        }
        Ok(Self {
            layer_index,
            k,
            a,
            similarity,
            clusterings,
            pool,
        })
    }

    /// Builds a layer from clusterings trained on `input`, keeping only the
    /// input rows that are used as centers.
    pub fn from_training(
        layer_index: usize,
        a: f64,
        similarity: Similarity,
        input: Input<'_>,
        mut clusterings: Vec<ClusteringModel>,
    ) -> Result<Self> {
        let mut used: Vec<usize> = clusterings
            .iter()
            .flat_map(|c| c.centers.iter().map(|&r| r as usize))
            .collect();
        used.sort_unstable();
        used.dedup();
        let mut remap = vec![u32::MAX; input.n()];
        for (p, &r) in used.iter().enumerate() {
            remap[r] = p as u32;
        }
        for c in &mut clusterings {
            for r in &mut c.centers {
                *r = remap[*r as usize];
            }
        }
        let pool = match input {
            Input::Data(m) => CenterPool::Data(m.select_rows(&used)),
            Input::Codes(c) => CenterPool::Codes(c.select_rows(&used)),
        };
        Self::new(layer_index, a, similarity, clusterings, pool)
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn v(&self) -> usize {
        self.clusterings.len()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn similarity(&self) -> Similarity {
        self.similarity
    }

    pub fn clusterings(&self) -> &[ClusteringModel] {
        &self.clusterings
    }

    pub fn pool(&self) -> &CenterPool {
        &self.pool
    }

    /// Feature dimension this layer expects.
    pub fn input_dim(&self) -> usize {
        self.pool.as_input().dim()
    }

    /// Winners of every clustering for every sample.
    pub fn encode(&self, input: Input<'_>) -> Result<CodeMatrix> {
        if input.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: input.dim(),
            });
        }
        let pool = self.pool.as_input();
        let columns: Vec<Vec<u32>> = self
            .clusterings
            .par_iter()
            .map(|c| encode_clustering(c, pool, input, self.similarity))
            .collect::<Result<_>>()?;
        CodeMatrix::from_columns(input.n(), self.k, &columns)
    }
}

/// Trains `v` clusterings on independent sub-streams and encodes the input.
///
/// Clustering `c` draws from `stream.with_index(c)`; `stream` should already
/// carry the layer index.
pub fn train_layer(
    input: Input<'_>,
    k: usize,
    v: usize,
    a: f64,
    similarity: Similarity,
    stream: &RandomStream,
) -> Result<(LayerModel, CodeMatrix)> {
    if v == 0 {
        return Err(invalid("a layer needs at least one clustering"));
    }
    let clusterings: Vec<ClusteringModel> = (0..v)
        .into_par_iter()
        .map(|c| train_clustering(input, k, a, similarity, &stream.with_index(c as u32)))
        .collect::<Result<_>>()?;
    let layer = LayerModel::from_training(stream.layer() as usize, a, similarity, input, clusterings)?;
    let codes = layer.encode(input)?;
    Ok((layer, codes))
}
