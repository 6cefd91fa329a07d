//! Shared data-loading flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mbn::io::{
    load_dense_csv, load_idx, load_idx_images, load_sparse_text, normalize, write_dense_csv, Normalization,
    SparseTextOptions,
};
use mbn::{DataMatrix, LabelVector};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// IDX image file; labels from --labels
    Idx,
    /// Comma-separated dense rows
    Csv,
    /// `label index:value` lines
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    None,
    Scale255,
    L2,
}

impl From<NormalizeArg> for Normalization {
    fn from(n: NormalizeArg) -> Self {
        match n {
            NormalizeArg::None => Normalization::None,
            NormalizeArg::Scale255 => Normalization::Scale255,
            NormalizeArg::L2 => Normalization::L2Row,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input data file
    #[arg(long)]
    pub data: PathBuf,
    /// Input format; inferred from the extension when omitted (.csv, .txt/.svm, otherwise IDX)
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// IDX label file
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// CSV column holding labels
    #[arg(long)]
    pub label_column: Option<usize>,
    /// Sparse-text feature indices start at 1
    #[arg(long)]
    pub one_based: bool,
    /// Sparse-text feature count (inferred when omitted)
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    pub normalize: NormalizeArg,
}

impl DataArgs {
    fn format(&self) -> Format {
        self.format.unwrap_or_else(|| match self.data.extension().and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            Some("txt") | Some("svm") => Format::Sparse,
            _ => Format::Idx,
        })
    }

    /// Normalized data and its labels, if the source has any.
    pub fn load(&self) -> Result<(DataMatrix, Option<LabelVector>), CliError> {
        let (x, y) = self.load_raw().map_err(|e| with_path(&self.data, e))?;
        log::info!("loaded {} x {} from {}", x.n(), x.d(), self.data.display());
        Ok((normalize(&x, self.normalize.into()), y))
    }

    fn load_raw(&self) -> Result<(DataMatrix, Option<LabelVector>), CliError> {
        Ok(match self.format() {
            Format::Idx => match &self.labels {
                Some(labels) => {
                    let (x, y) = load_idx(&self.data, labels)?;
                    (x, Some(y))
                }
                None => (load_idx_images(&self.data)?, None),
            },
            Format::Csv => load_dense_csv(&self.data, self.label_column)?,
            Format::Sparse => {
                let options = SparseTextOptions {
                    one_based: self.one_based,
                    dim: self.dim,
                };
                let (x, y) = load_sparse_text(&self.data, options)?;
                (x, Some(y))
            }
        })
    }
}

/// Prefixes an error with the file it concerns.
pub fn with_path(path: &Path, e: impl Into<CliError>) -> CliError {
    CliError::Invalid(format!("{}: {}", path.display(), e.into()))
}

/// Embedding CSVs carry the label (or -1) in column 0 followed by the coordinates.
pub fn write_embedding(path: &Path, z: &DataMatrix, labels: Option<&LabelVector>) -> Result<(), CliError> {
    let unlabeled;
    let labels = match labels {
        Some(l) => l,
        None => {
            unlabeled = LabelVector::new(vec![None; z.n()]);
            &unlabeled
        }
    };
    write_dense_csv(path, z, Some(labels))?;
    Ok(())
}

pub fn read_embedding(path: &Path, label_column: usize) -> Result<(DataMatrix, LabelVector), CliError> {
    let (z, y) = load_dense_csv(path, Some(label_column)).map_err(|e| with_path(path, e))?;
    Ok((z, y.expect("label column requested")))
}

/// Comma-separated list of numbers.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("{s:?} is not a valid number")))
        .collect()
}
