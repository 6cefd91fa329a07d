//! Distillation of a trained network into a small feedforward model.
//!
//! The network's embedding is clustered once and the one-hot cluster
//! indicators become training targets for an MLP on the raw inputs (or the
//! embedding itself is regressed directly). Prediction then costs a few dense
//! layers instead of the full ensemble.

mod format;
mod mlp;

pub use format::{load_mlp, mlp_from_bytes, mlp_to_bytes, save_mlp, MLP_FORMAT_VERSION, MLP_MAGIC};
pub use mlp::{
    from_array, loss_and_gradients, mlp_predict, mlp_train, to_array, Gradients, Loss, MlpModel, OutputActivation,
    TrainOptions,
};

use crate::data::DataMatrix;
use crate::error::Result;
use crate::eval::{kmeans_best_of, DEFAULT_MAX_ITERS};
use crate::rng::{Purpose, RandomStream};

/// One-hot `n × k` cluster indicators from the best of `restarts` k-means runs.
pub fn pseudo_labels(embedding: &DataMatrix, k: usize, restarts: usize, stream: &RandomStream) -> Result<DataMatrix> {
    let best = kmeans_best_of(embedding, k, restarts, DEFAULT_MAX_ITERS, &stream.with_purpose(Purpose::KMeans))?;
    let mut values = vec![0.0; embedding.n() * k];
    for (i, &c) in best.labels.iter().enumerate() {
        values[i * k + c] = 1.0;
    }
    DataMatrix::dense(embedding.n(), k, values)
}

/// Column of the largest entry in every row; the first wins ties.
pub fn argmax_rows(m: &DataMatrix) -> Vec<usize> {
    (0..m.n())
        .map(|i| {
            let mut best = (0, f64::NEG_INFINITY);
            m.row(i).for_each(|j, v| {
                if v > best.1 {
                    best = (j, v);
                }
            });
            best.0
        })
        .collect()
}
