//! Dataset loaders, normalizers and per-class subsetting.

mod delimited;
mod idx;
mod sparse_text;

use std::str::FromStr;

use log::warn;

pub use delimited::{load_dense_csv, write_dense_csv};
pub use idx::{load_idx, load_idx_images, load_idx_labels, write_idx_images, write_idx_labels, IMAGE_MAGIC, LABEL_MAGIC};
pub use sparse_text::{load_sparse_text, write_sparse_text, SparseTextOptions};

use crate::data::{DataMatrix, LabelVector};
use crate::error::{invalid, Error, Result};
use crate::rng::{subsample_without_replacement, Purpose, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide every entry by 255 (8-bit pixels to `[0, 1]`).
    Scale255,
    /// Scale every row to unit Euclidean norm.
    L2Row,
    None,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale255" | "scale-by-255" => Ok(Self::Scale255),
            "l2" | "l2-row" => Ok(Self::L2Row),
            "none" => Ok(Self::None),
            other => Err(invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Applies `mode` to `data`. All-zero rows pass through L2 normalization unchanged.
pub fn normalize(data: &DataMatrix, mode: Normalization) -> DataMatrix {
    match mode {
        Normalization::None => data.clone(),
        Normalization::Scale255 => data.map_values(|x| x / 255.0),
        Normalization::L2Row => {
            let mut zero_rows = 0;
            let scale: Vec<f64> = (0..data.n())
                .map(|i| {
                    let norm = data.row(i).sq_norm().sqrt();
                    if norm > 0.0 {
                        1.0 / norm
                    } else {
                        zero_rows += 1;
                        1.0
                    }
                })
                .collect();
            if zero_rows > 0 {
                warn!("{zero_rows} all-zero rows left unnormalized");
            }
            data.scale_rows(&scale)
        }
    }
}

/// Samples `per_class` rows of every labeled class without replacement.
///
/// Class `c` draws from its own stream, so adding a class leaves the others'
/// picks unchanged. Selected rows keep their original relative order and
/// unlabeled rows are dropped.
pub fn subset_per_class(
    data: &DataMatrix,
    labels: &LabelVector,
    per_class: usize,
    stream: &RandomStream,
) -> Result<(DataMatrix, LabelVector)> {
    if labels.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: labels.len(),
        });
    }
    let mut ids: Vec<u32> = labels.as_slice().iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let mut chosen = Vec::with_capacity(per_class * ids.len());
    for &c in &ids {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels.get(i) == Some(c)).collect();
        if members.len() < per_class {
            return Err(Error::InsufficientClass {
                class: c,
                available: members.len(),
                requested: per_class,
            });
        }
        let picks = subsample_without_replacement(&stream.with_purpose(Purpose::Subset).with_index(c), members.len(), per_class)?;
        chosen.extend(picks.into_iter().map(|p| members[p]));
    }
    chosen.sort_unstable();
    Ok((data.select_rows(&chosen), labels.select(&chosen)))
}
