//! Multilayer bootstrap networks.
//!
//! Each hidden layer is an ensemble of k-centers clusterings. A clustering
//! picks a random subset of input features and `k` random training samples as
//! centers, then encodes every sample as the one-hot index of its nearest
//! center. The concatenated codes feed the next layer; `k` shrinks layer by
//! layer and a PCA head produces the final embedding.

mod clustering;
mod format;
mod layer;
mod model;
mod schedule;

pub use clustering::{
    encode_clustering, encode_clustering_radial, selected_dim, train_clustering, ClusteringModel,
    FeatureSet, Input, Similarity,
};
pub use format::{load_model, model_from_bytes, model_summary_json, model_to_bytes, save_model, write_model, MAGIC};
pub(crate) use format::{Decoder, Encoder};
pub use layer::{train_layer, CenterPool, LayerModel};
pub use model::{
    fit_head, train_hidden, train_network, train_network_with_report, HiddenStack, NetworkConfig,
    NetworkModel, ScheduleRecord, TrainOutput, FORMAT_VERSION,
};
pub use schedule::{default_k1, plan_schedule, ScheduleParams};
