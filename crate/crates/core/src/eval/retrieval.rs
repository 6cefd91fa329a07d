//! Precision of nearest-neighbor retrieval in an embedding.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::data::{DataMatrix, LabelVector};
use crate::error::{invalid, Error, Result};

fn distances(x: &[f64], d: usize, query: usize, squared: bool) -> Vec<(f64, usize)> {
    let q = &x[query * d..(query + 1) * d];
    let n = x.len() / d.max(1);
    (0..n)
        .filter(|&i| i != query)
        .map(|i| {
            let s: f64 = x[i * d..(i + 1) * d].iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (if squared { s } else { s.sqrt() }, i)
        })
        .collect()
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// All other points ordered by ascending distance to `query`, ties by index.
/// `squared` selects squared Euclidean distance; the order is the same either way.
pub fn rank_neighbors(embedding: &DataMatrix, query: usize, squared: bool) -> Result<Vec<usize>> {
    if query >= embedding.n() {
        return Err(invalid(format!("query {query} out of range for {} points", embedding.n())));
    }
    let dense = embedding.to_dense();
    let mut dist = distances(dense.as_dense().unwrap(), embedding.d(), query, squared);
    dist.sort_unstable_by(by_distance_then_index);
    Ok(dist.into_iter().map(|(_, i)| i).collect())
}

/// Mean precision over all queries at each retrieval depth in `levels`.
///
/// Unlabeled queries score 0 everywhere and unlabeled retrieved points count as misses.
pub fn retrieval_precision(embedding: &DataMatrix, labels: &LabelVector, levels: &[usize]) -> Result<Vec<f64>> {
    let n = embedding.n();
    if n == 0 {
        return Err(invalid("empty corpus"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if levels.is_empty() {
        return Err(invalid("no retrieval depths given"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("retrieval depths must be strictly ascending"));
    }
    if levels[0] == 0 || *levels.last().unwrap() >= n {
        return Err(invalid(format!("retrieval depths must lie in 1..{n}")));
    }
    let depth = *levels.last().unwrap();
    let dense = embedding.to_dense();
    let x = dense.as_dense().unwrap();
    let d = embedding.d();
    let labels = labels.as_slice();

    let per_query: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|q| {
            let Some(own) = labels[q] else {
                return vec![0.0; levels.len()];
            };
            let mut dist = distances(x, d, q, true);
            if depth < dist.len() {
                dist.select_nth_unstable_by(depth - 1, by_distance_then_index);
                dist.truncate(depth);
            }
            dist.sort_unstable_by(by_distance_then_index);
            let mut out = Vec::with_capacity(levels.len());
            let mut hits = 0usize;
            let mut next = 0;
            for (rank, &(_, i)) in dist.iter().enumerate() {
                if labels[i] == Some(own) {
                    hits += 1;
                }
                if rank + 1 == levels[next] {
                    out.push(hits as f64 / levels[next] as f64);
                    next += 1;
                    if next == levels.len() {
                        break;
                    }
                }
            }
            out
        })
        .collect();

    let mut mean = vec![0.0; levels.len()];
    for p in &per_query {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    Ok(mean.into_iter().map(|m| m / n as f64).collect())
}
