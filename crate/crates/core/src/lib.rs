//! Multilayer bootstrap networks (MBN) for unsupervised nonlinear
//! dimensionality reduction, with the evaluation tools used around them:
//! k-means, NMI, Hungarian-matched accuracy, retrieval precision, the
//! bias/variance formulas of a bootstrap ensemble with a Monte Carlo check,
//! and distillation of a trained network into a small feedforward model.

pub mod bench;
pub mod data;
pub mod distill;
pub mod error;
pub mod eval;
pub mod io;
pub mod network;
pub mod pca;
pub mod rng;
pub mod theory;

pub use data::{expand_codes, CodeMatrix, DataMatrix, LabelVector};
pub use error::{Error, Result};
pub use network::{NetworkConfig, NetworkModel, Similarity};
pub use rng::RandomStream;
