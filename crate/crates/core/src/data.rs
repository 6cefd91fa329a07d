//! Sample containers: dense or sparse data matrices, label vectors and the
//! block one-hot code matrix emitted by every hidden layer.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Backing storage of a [`DataMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    /// Row-major `n × d` values.
    Dense(Vec<f64>),
    /// Compressed rows: row `i` owns `indices[indptr[i]..indptr[i+1]]`.
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    },
}

/// `n` samples by `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    storage: Storage,
}

/// A borrowed row of a [`DataMatrix`].
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse(&'a [u32], &'a [f64]),
}

impl Row<'_> {
    pub fn sq_norm(&self) -> f64 {
        match self {
            Row::Dense(v) => v.iter().map(|x| x * x).sum(),
            Row::Sparse(_, v) => v.iter().map(|x| x * x).sum(),
        }
    }

    /// Calls `f(column, value)` for every stored entry in column order.
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            Row::Dense(v) => v.iter().enumerate().for_each(|(j, &x)| f(j, x)),
            Row::Sparse(idx, v) => idx
                .iter()
                .zip(v.iter())
                .for_each(|(&j, &x)| f(j as usize, x)),
        }
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        match self {
            Row::Dense(v) => v.to_vec(),
            Row::Sparse(idx, v) => {
                let mut out = vec![0.0; d];
                for (&j, &x) in idx.iter().zip(v.iter()) {
                    out[j as usize] = x;
                }
                out
            }
        }
    }
}

impl DataMatrix {
    pub fn dense(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        Ok(Self {
            n,
            d,
            storage: Storage::Dense(values),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::dense(rows.len(), d, values)
    }

    /// Sparse matrix from per-row `(index, value)` lists with strictly increasing indices.
    pub fn sparse_from_rows(d: usize, rows: &[Vec<(u32, f64)>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(j, x) in row {
                indices.push(j);
                values.push(x);
            }
            indptr.push(indices.len());
        }
        Self::sparse(rows.len(), d, indptr, indices, values)
    }

    pub fn sparse(
        n: usize,
        d: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != n + 1 || indptr[0] != 0 || indptr[n] != indices.len() {
            return Err(invalid("malformed row pointer array"));
        }
        if indices.len() != values.len() {
            return Err(invalid("index and value arrays differ in length"));
        }
        for i in 0..n {
            if indptr[i + 1] < indptr[i] {
                return Err(invalid("row pointers must be non-decreasing"));
            }
            let row = &indices[indptr[i]..indptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!(
                    "row {i}: column indices must be strictly increasing"
                )));
            }
            if let Some(&last) = row.last() {
                if last as usize >= d {
                    return Err(invalid(format!("row {i}: column {last} out of range {d}")));
                }
            }
        }
        Ok(Self {
            n,
            d,
            storage: Storage::Sparse {
                indptr,
                indices,
                values,
            },
        })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            storage: Storage::Dense(vec![0.0; n * d]),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Dense values when the storage is dense.
    pub fn as_dense(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense(v) => Some(v),
            Storage::Sparse { .. } => None,
        }
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        match &self.storage {
            Storage::Dense(v) => Row::Dense(&v[i * self.d..(i + 1) * self.d]),
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                let r = indptr[i]..indptr[i + 1];
                Row::Sparse(&indices[r.clone()], &values[r])
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.row(i) {
            Row::Dense(v) => v[j],
            Row::Sparse(idx, v) => idx
                .binary_search(&(j as u32))
                .map_or(0.0, |p| v[p]),
        }
    }

    /// Number of nonzero entries. For sparse storage this counts stored entries.
    pub fn nonzeros(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.iter().filter(|x| x.to_bits() != 0).count(),
            Storage::Sparse { indices, .. } => indices.len(),
        }
    }

    /// Fraction of nonzero entries, `nonzeros / (n·d)`.
    pub fn sparsity(&self) -> f64 {
        let total = self.n * self.d;
        if total == 0 {
            0.0
        } else {
            self.nonzeros() as f64 / total as f64
        }
    }

    pub fn to_dense(&self) -> DataMatrix {
        match &self.storage {
            Storage::Dense(_) => self.clone(),
            Storage::Sparse { .. } => {
                let mut values = vec![0.0; self.n * self.d];
                for i in 0..self.n {
                    let out = &mut values[i * self.d..(i + 1) * self.d];
                    self.row(i).for_each(|j, x| out[j] = x);
                }
                DataMatrix {
                    n: self.n,
                    d: self.d,
                    storage: Storage::Dense(values),
                }
            }
        }
    }

    /// Sparse copy keeping every entry whose bit pattern is not `+0.0`.
    pub fn to_sparse(&self) -> DataMatrix {
        match &self.storage {
            Storage::Sparse { .. } => self.clone(),
            Storage::Dense(v) => {
                let mut indptr = Vec::with_capacity(self.n + 1);
                let mut indices = Vec::new();
                let mut values = Vec::new();
                indptr.push(0);
                for i in 0..self.n {
                    for (j, &x) in v[i * self.d..(i + 1) * self.d].iter().enumerate() {
                        if x.to_bits() != 0 {
                            indices.push(j as u32);
                            values.push(x);
                        }
                    }
                    indptr.push(indices.len());
                }
                DataMatrix {
                    n: self.n,
                    d: self.d,
                    storage: Storage::Sparse {
                        indptr,
                        indices,
                        values,
                    },
                }
            }
        }
    }

    /// Rows at `rows`, in that order, with the same storage kind.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        match &self.storage {
            Storage::Dense(v) => {
                let mut out = Vec::with_capacity(rows.len() * self.d);
                for &i in rows {
                    out.extend_from_slice(&v[i * self.d..(i + 1) * self.d]);
                }
                DataMatrix {
                    n: rows.len(),
                    d: self.d,
                    storage: Storage::Dense(out),
                }
            }
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => {
                let mut ptr = Vec::with_capacity(rows.len() + 1);
                let mut idx = Vec::new();
                let mut val = Vec::new();
                ptr.push(0);
                for &i in rows {
                    idx.extend_from_slice(&indices[indptr[i]..indptr[i + 1]]);
                    val.extend_from_slice(&values[indptr[i]..indptr[i + 1]]);
                    ptr.push(idx.len());
                }
                DataMatrix {
                    n: rows.len(),
                    d: self.d,
                    storage: Storage::Sparse {
                        indptr: ptr,
                        indices: idx,
                        values: val,
                    },
                }
            }
        }
    }

    /// Applies `f` to every stored value.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> DataMatrix {
        let storage = match &self.storage {
            Storage::Dense(v) => Storage::Dense(v.iter().map(|&x| f(x)).collect()),
            Storage::Sparse {
                indptr,
                indices,
                values,
            } => Storage::Sparse {
                indptr: indptr.clone(),
                indices: indices.clone(),
                values: values.iter().map(|&x| f(x)).collect(),
            },
        };
        DataMatrix {
            n: self.n,
            d: self.d,
            storage,
        }
    }

    /// Scales every row `i` by `scale[i]`.
    pub fn scale_rows(&self, scale: &[f64]) -> DataMatrix {
        assert_eq!(scale.len(), self.n);
        let mut out = self.clone();
        match &mut out.storage {
            Storage::Dense(v) => {
                for (i, s) in scale.iter().enumerate() {
                    v[i * self.d..(i + 1) * self.d]
                        .iter_mut()
                        .for_each(|x| *x *= s);
                }
            }
            Storage::Sparse { indptr, values, .. } => {
                for (i, s) in scale.iter().enumerate() {
                    values[indptr[i]..indptr[i + 1]]
                        .iter_mut()
                        .for_each(|x| *x *= s);
                }
            }
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for i in 0..self.n {
            self.row(i).for_each(|j, x| mean[j] += x);
        }
        if self.n > 0 {
            let inv = 1.0 / self.n as f64;
            mean.iter_mut().for_each(|m| *m *= inv);
        }
        mean
    }

    /// `self · b` where `b` is a row-major `d × p` matrix; returns row-major `n × p`.
    pub fn mul_dense(&self, b: &[f64], p: usize) -> Vec<f64> {
        assert_eq!(b.len(), self.d * p);
        let mut out = vec![0.0; self.n * p];
        for i in 0..self.n {
            let acc = &mut out[i * p..(i + 1) * p];
            self.row(i).for_each(|j, x| {
                let brow = &b[j * p..(j + 1) * p];
                for (a, &bv) in acc.iter_mut().zip(brow) {
                    *a += x * bv;
                }
            });
        }
        out
    }

    /// `selfᵀ · y` where `y` is a row-major `n × p` matrix; returns row-major `d × p`.
    pub fn t_mul_dense(&self, y: &[f64], p: usize) -> Vec<f64> {
        assert_eq!(y.len(), self.n * p);
        let mut out = vec![0.0; self.d * p];
        for i in 0..self.n {
            let yrow = &y[i * p..(i + 1) * p];
            self.row(i).for_each(|j, x| {
                let acc = &mut out[j * p..(j + 1) * p];
                for (a, &yv) in acc.iter_mut().zip(yrow) {
                    *a += x * yv;
                }
            });
        }
        out
    }
}

/// Per-sample class ids with an explicit unlabeled marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<Option<u32>>,
}

impl LabelVector {
    pub fn new(labels: Vec<Option<u32>>) -> Self {
        Self { labels }
    }

    pub fn from_classes(classes: &[usize]) -> Self {
        Self {
            labels: classes.iter().map(|&c| Some(c as u32)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<u32> {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[Option<u32>] {
        &self.labels
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Renumbers class ids to `0..c` in order of first appearance of each
    /// sorted id. Returns the compacted vector and the original id of each new class.
    pub fn compact(&self) -> (LabelVector, Vec<u32>) {
        let mut ids: Vec<u32> = self.labels.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        let labels = self
            .labels
            .iter()
            .map(|l| l.map(|c| ids.binary_search(&c).unwrap() as u32))
            .collect();
        (LabelVector { labels }, ids)
    }

    /// Dense class indices; fails if any entry is unlabeled.
    pub fn classes(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.map(|c| c as usize)
                    .ok_or_else(|| invalid(format!("sample {i} is unlabeled")))
            })
            .collect()
    }

    pub fn select(&self, rows: &[usize]) -> LabelVector {
        LabelVector {
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Winner indices of `v` clusterings with `k` centers each, for `n` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    n: usize,
    v: usize,
    k: usize,
    winners: Vec<u32>,
}

impl CodeMatrix {
    /// `winners` is row-major `n × v`, each entry in `0..k`.
    pub fn new(n: usize, v: usize, k: usize, winners: Vec<u32>) -> Result<Self> {
        if winners.len() != n * v {
            return Err(Error::DimensionMismatch {
                expected: n * v,
                found: winners.len(),
            });
        }
        if let Some(w) = winners.iter().find(|&&w| w as usize >= k) {
            return Err(invalid(format!("winner index {w} out of block width {k}")));
        }
        Ok(Self { n, v, k, winners })
    }

    /// Assembles a code matrix from one winner column per clustering.
    pub fn from_columns(n: usize, k: usize, columns: &[Vec<u32>]) -> Result<Self> {
        let v = columns.len();
        let mut winners = vec![0u32; n * v];
        for (c, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            for (i, &w) in col.iter().enumerate() {
                winners[i * v + c] = w;
            }
        }
        Self::new(n, v, k, winners)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Width of the expanded one-hot code, `v·k`.
    pub fn dim(&self) -> usize {
        self.v * self.k
    }

    pub fn winners(&self) -> &[u32] {
        &self.winners
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.winners[i * self.v..(i + 1) * self.v]
    }

    pub fn select_rows(&self, rows: &[usize]) -> CodeMatrix {
        let mut winners = Vec::with_capacity(rows.len() * self.v);
        for &i in rows {
            winners.extend_from_slice(self.row(i));
        }
        CodeMatrix {
            n: rows.len(),
            v: self.v,
            k: self.k,
            winners,
        }
    }

    /// Number of clusterings in which rows `a` and `b` pick the same center.
    pub fn agreement(&self, a: usize, b: usize) -> usize {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .filter(|(x, y)| x == y)
            .count()
    }
}

/// Expands block codes into the sparse `n × (v·k)` 0/1 matrix.
pub fn expand_codes(codes: &CodeMatrix) -> DataMatrix {
    let (n, v, k) = (codes.n, codes.v, codes.k);
    let indptr: Vec<usize> = (0..=n).map(|i| i * v).collect();
    let mut indices = Vec::with_capacity(n * v);
    for i in 0..n {
        for (b, &w) in codes.row(i).iter().enumerate() {
            indices.push((b * k) as u32 + w);
        }
    }
    DataMatrix {
        n,
        d: v * k,
        storage: Storage::Sparse {
            indptr,
            indices,
            values: vec![1.0; n * v],
        },
    }
}
