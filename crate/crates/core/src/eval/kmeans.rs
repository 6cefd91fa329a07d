//! Lloyd's k-means seeded from distinct sampled points.

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{invalid, Result};
use crate::rng::{subsample_without_replacement, RandomStream};

pub const DEFAULT_MAX_ITERS: usize = 300;

/// Restarts used when picking the best-objective run.
pub const DEFAULT_RESTARTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// Row-major `k × d`.
    pub centroids: Vec<f64>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub objective: f64,
    /// Objective after every assignment step.
    pub trace: Vec<f64>,
}

struct Assignment {
    labels: Vec<usize>,
    dists: Vec<f64>,
    objective: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(x: &[f64], d: usize, centroids: &[f64], k: usize) -> Assignment {
    let n = x.len() / d.max(1);
    let mut labels = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mut best = (0usize, f64::INFINITY);
        for c in 0..k {
            let dist = sq_dist(row, &centroids[c * d..(c + 1) * d]);
            if dist < best.1 {
                best = (c, dist);
            }
        }
        labels.push(best.0);
        dists.push(best.1);
    }
    let objective = dists.iter().sum();
    Assignment {
        labels,
        dists,
        objective,
    }
}

/// New centroids as cluster means. An empty cluster is moved onto the point
/// currently farthest from its own centroid.
fn update(x: &[f64], d: usize, k: usize, a: &Assignment) -> Vec<f64> {
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &c) in a.labels.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(&x[i * d..(i + 1) * d]) {
            *s += v;
        }
    }
    let mut far = a.dists.clone();
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            sums[c * d..(c + 1) * d].iter_mut().for_each(|s| *s *= inv);
        } else {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, &dist) in far.iter().enumerate() {
                if dist > best.1 {
                    best = (i, dist);
                }
            }
            far[best.0] = f64::NEG_INFINITY;
            sums[c * d..(c + 1) * d].copy_from_slice(&x[best.0 * d..(best.0 + 1) * d]);
        }
    }
    sums
}

/// One k-means run. Stops at an assignment fixpoint or after `max_iters` assignment steps.
pub fn kmeans(data: &DataMatrix, k: usize, max_iters: usize, stream: &RandomStream) -> Result<KMeansResult> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} must lie in 1..={n}")));
    }
    if max_iters == 0 {
        return Err(invalid("k-means needs at least one iteration"));
    }
    let dense = data.to_dense();
    let x = dense.as_dense().unwrap();
    let d = data.d();
    let seeds = subsample_without_replacement(stream, n, k)?;
    let mut centroids = Vec::with_capacity(k * d);
    for &s in &seeds {
        centroids.extend_from_slice(&x[s * d..(s + 1) * d]);
    }

    let mut trace = Vec::new();
    let mut previous: Option<Vec<usize>> = None;
    let mut current;
    let mut iter = 0;
    loop {
        current = assign(x, d, &centroids, k);
        trace.push(current.objective);
        iter += 1;
        if previous.as_ref() == Some(&current.labels) || iter == max_iters {
            break;
        }
        centroids = update(x, d, k, &current);
        previous = Some(current.labels.clone());
    }
    Ok(KMeansResult {
        labels: current.labels,
        centroids,
        objective: current.objective,
        trace,
    })
}

/// `restarts` independent runs; run `r` uses the stream at index `stream.index() + r`.
pub fn kmeans_runs(
    data: &DataMatrix,
    k: usize,
    restarts: usize,
    max_iters: usize,
    stream: &RandomStream,
) -> Result<Vec<KMeansResult>> {
    if restarts == 0 {
        return Err(invalid("need at least one restart"));
    }
    (0..restarts)
        .into_par_iter()
        .map(|r| kmeans(data, k, max_iters, &stream.with_index(stream.index() + r as u32)))
        .collect()
}

/// The run with the smallest objective among `restarts` runs; earliest run wins ties.
pub fn kmeans_best_of(
    data: &DataMatrix,
    k: usize,
    restarts: usize,
    max_iters: usize,
    stream: &RandomStream,
) -> Result<KMeansResult> {
    let runs = kmeans_runs(data, k, restarts, max_iters, stream)?;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.objective < runs[best].objective {
            best = r;
        }
    }
    Ok(runs.into_iter().nth(best).unwrap())
}
