//! Evaluation protocol: k-means on embeddings, partition agreement scores and
//! retrieval precision.

mod kmeans;
mod metrics;
mod retrieval;

pub use kmeans::{kmeans, kmeans_best_of, kmeans_runs, KMeansResult, DEFAULT_MAX_ITERS, DEFAULT_RESTARTS};
pub use metrics::{clustering_accuracy, clustering_accuracy_classes, hungarian, nmi, nmi_classes};
pub use retrieval::{rank_neighbors, retrieval_precision};
