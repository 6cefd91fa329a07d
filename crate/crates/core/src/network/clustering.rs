//! One k-centers clustering: a random feature subset, `k` randomly sampled
//! training points as centers, and a one-nearest-center encoder.

use ndarray::{linalg::general_mat_mul, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{CodeMatrix, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::rng::{subsample_without_replacement, Purpose, RandomStream};

/// How a layer scores a sample against a center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    /// Nearest center by squared Euclidean distance. Bottom layer only.
    SquaredEuclidean,
    /// Largest inner product with the center.
    DotProduct,
}

/// Input to a hidden layer: raw data at the bottom, block codes above.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Data(&'a DataMatrix),
    Codes(&'a CodeMatrix),
}

impl Input<'_> {
    pub fn n(&self) -> usize {
        match self {
            Input::Data(m) => m.n(),
            Input::Codes(c) => c.n(),
        }
    }

    /// Feature dimension; for codes, the width of the expanded one-hot code.
    pub fn dim(&self) -> usize {
        match self {
            Input::Data(m) => m.d(),
            Input::Codes(c) => c.dim(),
        }
    }
}

/// A subset of `0..dim`, stored as a bitmap. Iterates in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    dim: usize,
    words: Vec<u64>,
    count: usize,
}

impl FeatureSet {
    pub fn from_indices(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut words = vec![0u64; dim.div_ceil(64)];
        let mut count = 0;
        for j in indices {
            if j >= dim {
                return Err(invalid(format!("feature {j} out of range {dim}")));
            }
            let (w, b) = (j / 64, j % 64);
            if words[w] & (1 << b) == 0 {
                words[w] |= 1 << b;
                count += 1;
            }
        }
        Ok(Self { dim, words, count })
    }

    pub(crate) fn from_words(dim: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != dim.div_ceil(64) {
            return Err(Error::Decode("feature bitmap has wrong length".into()));
        }
        if dim % 64 != 0 {
            if let Some(&last) = words.last() {
                if last >> (dim % 64) != 0 {
                    return Err(Error::Decode("feature bitmap has bits past its dimension".into()));
                }
            }
        }
        let count = words.iter().map(|w| w.count_ones() as usize).sum();
        Ok(Self { dim, words, count })
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        j < self.dim && self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut rest = bits;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

/// A trained k-centers clustering.
///
/// `centers[j]` is a row of the center source the model was trained or
/// pooled against; the center vector itself is that row restricted to
/// `features`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringModel {
    pub features: FeatureSet,
    pub centers: Vec<u32>,
}

impl ClusteringModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Center `j` as a dense vector over the selected features.
    pub fn center_vector(&self, source: Input<'_>, j: usize) -> Vec<f64> {
        let row = self.centers[j] as usize;
        match source {
            Input::Data(m) => {
                let full = m.row(row).to_dense(m.d());
                self.features.iter().map(|f| full[f]).collect()
            }
            Input::Codes(c) => {
                let k = c.k();
                let mut v = Vec::with_capacity(self.features.len());
                let winners = c.row(row);
                for f in self.features.iter() {
                    v.push(if winners[f / k] as usize == f % k { 1.0 } else { 0.0 });
                }
                v
            }
        }
    }
}

/// Number of selected features, `max(1, round(a·d))`.
pub fn selected_dim(d: usize, a: f64) -> usize {
    ((a * d as f64).round() as usize).clamp(1, d.max(1))
}

/// Samples features and centers for one clustering.
pub fn train_clustering(
    input: Input<'_>,
    k: usize,
    a: f64,
    similarity: Similarity,
    stream: &RandomStream,
) -> Result<ClusteringModel> {
    let (n, d) = (input.n(), input.dim());
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} must lie in 1..={n}")));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(invalid(format!("feature fraction a = {a} must lie in (0, 1]")));
    }
    if d == 0 {
        return Err(invalid("input has no features"));
    }
    if matches!(input, Input::Codes(_)) && similarity != Similarity::DotProduct {
        return Err(invalid("layers over block codes use dot-product similarity"));
    }
    let d_hat = selected_dim(d, a);
    let features = subsample_without_replacement(
        &stream.with_purpose(Purpose::FeatureSelection),
        d,
        d_hat,
    )?;
    let centers = subsample_without_replacement(&stream.with_purpose(Purpose::CenterSampling), n, k)?;
    Ok(ClusteringModel {
        features: FeatureSet::from_indices(d, features)?,
        centers: centers.into_iter().map(|c| c as u32).collect(),
    })
}

/// Winner index for every sample of `input`. Ties go to the smallest center index.
pub fn encode_clustering(
    model: &ClusteringModel,
    centers: Input<'_>,
    input: Input<'_>,
    similarity: Similarity,
) -> Result<Vec<u32>> {
    check_dims(model, centers, input)?;
    match (centers, input) {
        (Input::Data(c), Input::Data(x)) => Ok(match (c.as_dense(), x.as_dense()) {
            (Some(cv), Some(xv)) => encode_dense(model, cv, c.d(), xv, x.n(), similarity),
            _ => encode_sparse(model, c, x, similarity),
        }),
        (Input::Codes(c), Input::Codes(x)) => {
            if similarity != Similarity::DotProduct {
                return Err(invalid("layers over block codes use dot-product similarity"));
            }
            Ok(encode_codes(model, c, x))
        }
        _ => Err(invalid("center source and input are of different kinds")),
    }
}

/// Winners chosen by maximizing `radial(‖w − x‖²)` with distances computed
/// directly on the selected features. Any strictly decreasing `radial`
/// reproduces [`encode_clustering`] under squared Euclidean similarity.
pub fn encode_clustering_radial(
    model: &ClusteringModel,
    centers: &DataMatrix,
    input: &DataMatrix,
    radial: impl Fn(f64) -> f64,
) -> Result<Vec<u32>> {
    check_dims(model, Input::Data(centers), Input::Data(input))?;
    let fl = model.features.to_vec();
    let center_rows: Vec<Vec<f64>> = (0..model.k())
        .map(|j| model.center_vector(Input::Data(centers), j))
        .collect();
    let mut out = Vec::with_capacity(input.n());
    for i in 0..input.n() {
        let full = input.row(i).to_dense(input.d());
        let x: Vec<f64> = fl.iter().map(|&f| full[f]).collect();
        let mut best = (0u32, f64::NEG_INFINITY);
        for (j, w) in center_rows.iter().enumerate() {
            let dist: f64 = w.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            let s = radial(dist);
            if s > best.1 {
                best = (j as u32, s);
            }
        }
        out.push(best.0);
    }
    Ok(out)
}

fn check_dims(model: &ClusteringModel, centers: Input<'_>, input: Input<'_>) -> Result<()> {
    let dim = model.features.dim();
    for found in [centers.dim(), input.dim()] {
        if found != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found,
            });
        }
    }
    if let Some(&c) = model.centers.iter().find(|&&c| c as usize >= centers.n()) {
        return Err(invalid(format!("center row {c} out of range {}", centers.n())));
    }
    Ok(())
}

const ROW_BLOCK: usize = 256;

/// Both sides dense: scores come from one matrix product per row block,
/// `‖w‖² − 2·w·x` for distances and `w·x` for inner products.
fn encode_dense(
    model: &ClusteringModel,
    cv: &[f64],
    d: usize,
    xv: &[f64],
    n: usize,
    similarity: Similarity,
) -> Vec<u32> {
    let fl = model.features.to_vec();
    let dh = fl.len();
    let k = model.k();
    let mut w = Array2::<f64>::zeros((k, dh));
    for (j, &c) in model.centers.iter().enumerate() {
        let row = &cv[c as usize * d..(c as usize + 1) * d];
        for (t, &f) in fl.iter().enumerate() {
            w[[j, t]] = row[f];
        }
    }
    let norms: Vec<f64> = w.rows().into_iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
    let wt = w.t();

    let mut out = Vec::with_capacity(n);
    let mut xb = vec![0.0; ROW_BLOCK * dh];
    let mut g = Array2::<f64>::zeros((ROW_BLOCK, k));
    for start in (0..n).step_by(ROW_BLOCK) {
        let rows = ROW_BLOCK.min(n - start);
        for r in 0..rows {
            let row = &xv[(start + r) * d..(start + r + 1) * d];
            let dst = &mut xb[r * dh..(r + 1) * dh];
            for (t, &f) in fl.iter().enumerate() {
                dst[t] = row[f];
            }
        }
        let xview = ArrayView2::from_shape((rows, dh), &xb[..rows * dh]).unwrap();
        let mut gview = g.slice_mut(ndarray::s![..rows, ..]);
        general_mat_mul(1.0, &xview, &wt, 0.0, &mut gview);
        for r in 0..rows {
            let scores = gview.row(r);
            out.push(match similarity {
                Similarity::SquaredEuclidean => {
                    argmin(scores.iter().zip(&norms).map(|(&dot, &nn)| nn - 2.0 * dot))
                }
                Similarity::DotProduct => argmax(scores.iter().copied()),
            });
        }
    }
    out
}

/// General path for sparse storage: inverted lists of center values per
/// selected feature, accumulated over each sample's stored entries.
fn encode_sparse(
    model: &ClusteringModel,
    c: &DataMatrix,
    x: &DataMatrix,
    similarity: Similarity,
) -> Vec<u32> {
    let d = c.d();
    let k = model.k();
    let mut counts = vec![0usize; d + 1];
    let mut norms = vec![0.0; k];
    for (j, &row) in model.centers.iter().enumerate() {
        c.row(row as usize).for_each(|f, v| {
            if model.features.contains(f) {
                counts[f + 1] += 1;
                norms[j] += v * v;
            }
        });
    }
    for f in 0..d {
        counts[f + 1] += counts[f];
    }
    let offsets = counts;
    let mut fill = offsets.clone();
    let mut list = vec![(0u32, 0.0f64); offsets[d]];
    for (j, &row) in model.centers.iter().enumerate() {
        c.row(row as usize).for_each(|f, v| {
            if model.features.contains(f) {
                list[fill[f]] = (j as u32, v);
                fill[f] += 1;
            }
        });
    }

    let mut dots = vec![0.0; k];
    let mut out = Vec::with_capacity(x.n());
    for i in 0..x.n() {
        dots.iter_mut().for_each(|s| *s = 0.0);
        x.row(i).for_each(|f, v| {
            if model.features.contains(f) {
                for &(j, w) in &list[offsets[f]..offsets[f + 1]] {
                    dots[j as usize] += w * v;
                }
            }
        });
        out.push(match similarity {
            Similarity::SquaredEuclidean => {
                argmin(dots.iter().zip(&norms).map(|(&dot, &nn)| nn - 2.0 * dot))
            }
            Similarity::DotProduct => argmax(dots.iter().copied()),
        });
    }
    out
}

/// Code input: the inner product of two one-hot codes restricted to the
/// selected columns is the number of shared selected winners. Each sample
/// only touches centers sharing at least one selected winner with it.
fn encode_codes(model: &ClusteringModel, c: &CodeMatrix, x: &CodeMatrix) -> Vec<u32> {
    let (vp, kp) = (x.v(), x.k());
    let cols = vp * kp;
    let k = model.k();
    let mut offsets = vec![0u32; cols + 1];
    for &row in &model.centers {
        for (b, &w) in c.row(row as usize).iter().enumerate() {
            let col = b * kp + w as usize;
            if model.features.contains(col) {
                offsets[col + 1] += 1;
            }
        }
    }
    for t in 0..cols {
        offsets[t + 1] += offsets[t];
    }
    let mut fill: Vec<u32> = offsets[..cols].to_vec();
    let mut list = vec![0u32; offsets[cols] as usize];
    for (j, &row) in model.centers.iter().enumerate() {
        for (b, &w) in c.row(row as usize).iter().enumerate() {
            let col = b * kp + w as usize;
            if model.features.contains(col) {
                list[fill[col] as usize] = j as u32;
                fill[col] += 1;
            }
        }
    }

    let mut scores = vec![0u32; k];
    let mut touched: Vec<u32> = Vec::new();
    let mut out = Vec::with_capacity(x.n());
    for i in 0..x.n() {
        for (b, &w) in x.row(i).iter().enumerate() {
            let col = b * kp + w as usize;
            if model.features.contains(col) {
                for &j in &list[offsets[col] as usize..offsets[col + 1] as usize] {
                    if scores[j as usize] == 0 {
                        touched.push(j);
                    }
                    scores[j as usize] += 1;
                }
            }
        }
        // untouched centers score 0, so the winner is 0 when nothing is shared
        let mut best = (0u32, 0u32);
        for &j in &touched {
            let s = scores[j as usize];
            if s > best.1 || (s == best.1 && j < best.0) {
                best = (j, s);
            }
        }
        for &j in &touched {
            scores[j as usize] = 0;
        }
        touched.clear();
        out.push(best.0);
    }
    out
}

#[inline]
fn argmin(scores: impl Iterator<Item = f64>) -> u32 {
    let mut best = (0u32, f64::INFINITY);
    for (j, s) in scores.enumerate() {
        if s < best.1 {
            best = (j as u32, s);
        }
    }
    best.0
}

#[inline]
fn argmax(scores: impl Iterator<Item = f64>) -> u32 {
    let mut best = (0u32, f64::NEG_INFINITY);
    for (j, s) in scores.enumerate() {
        if s > best.1 {
            best = (j as u32, s);
        }
    }
    best.0
}

/// Dense reference scoring on materialized center vectors; used by tests.
#[cfg(test)]
pub(crate) fn reference_winners(
    model: &ClusteringModel,
    centers: Input<'_>,
    input: Input<'_>,
    similarity: Similarity,
) -> Vec<u32> {
    let fl = model.features.to_vec();
    let ws: Vec<Vec<f64>> = (0..model.k()).map(|j| model.center_vector(centers, j)).collect();
    (0..input.n())
        .map(|i| {
            let full: Vec<f64> = match input {
                Input::Data(m) => m.row(i).to_dense(m.d()),
                Input::Codes(c) => {
                    let mut v = vec![0.0; c.dim()];
                    for (b, &w) in c.row(i).iter().enumerate() {
                        v[b * c.k() + w as usize] = 1.0;
                    }
                    v
                }
            };
            let x: Vec<f64> = fl.iter().map(|&f| full[f]).collect();
            let scores = ws.iter().map(|w| match similarity {
                Similarity::SquaredEuclidean => {
                    w.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                }
                Similarity::DotProduct => -w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>(),
            });
            argmin(scores)
        })
        .collect()
}
