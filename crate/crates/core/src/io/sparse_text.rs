//! Sparse `label index:value ...` text, one sample per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::{DataMatrix, LabelVector, Row};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SparseTextOptions {
    /// Feature indices in the file start at 1 rather than 0.
    pub one_based: bool,
    /// Feature count; inferred from the largest index when absent.
    pub dim: Option<usize>,
}

/// Reads sparse rows. A label of -1 marks an unlabeled sample and a line holding
/// only a label is an all-zero row. Blank lines are skipped.
pub fn load_sparse_text(path: &Path, options: SparseTextOptions) -> Result<(DataMatrix, LabelVector)> {
    let reader = BufReader::new(File::open(path)?);
    let mut indptr = vec![0usize];
    let mut indices: Vec<u32> = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let offset = u64::from(options.one_based);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        let label: i64 = label
            .parse()
            .map_err(|_| err(format!("label {label:?} is not an integer")))?;
        labels.push(match label {
            -1 => None,
            l if l >= 0 => Some(l as u32),
            l => return Err(err(format!("label {l} is negative"))),
        });
        let row_start = indices.len();
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| err(format!("{token:?} is not index:value")))?;
            let idx: u64 = idx.parse().map_err(|_| err(format!("bad index {idx:?}")))?;
            if idx < offset {
                return Err(err("index 0 in one-based mode".to_string()));
            }
            let col = idx - offset;
            if col > u64::from(u32::MAX) {
                return Err(err(format!("index {idx} too large")));
            }
            let col = col as u32;
            if indices.len() > row_start && indices[indices.len() - 1] >= col {
                return Err(err("indices must be strictly increasing".to_string()));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("bad value {val:?}")))?;
            indices.push(col);
            values.push(val);
        }
        indptr.push(indices.len());
    }
    let inferred = indices.iter().max().map_or(0, |&m| m as usize + 1);
    let d = match options.dim {
        Some(d) if d < inferred => {
            return Err(Error::Parse {
                line: 0,
                message: format!("index {} exceeds the declared dimension {d}", inferred - 1),
            })
        }
        Some(d) => d,
        None => inferred,
    };
    let n = labels.len();
    Ok((DataMatrix::sparse(n, d, indptr, indices, values)?, LabelVector::new(labels)))
}

/// Writes every stored entry of `data` (dense rows are written without zeros).
pub fn write_sparse_text(path: &Path, data: &DataMatrix, labels: &LabelVector, one_based: bool) -> Result<()> {
    if labels.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: labels.len(),
        });
    }
    let offset = u64::from(one_based);
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..data.n() {
        match labels.get(i) {
            Some(c) => write!(w, "{c}")?,
            None => write!(w, "-1")?,
        }
        match data.row(i) {
            Row::Sparse(idx, val) => {
                for (j, v) in idx.iter().zip(val) {
                    write!(w, " {}:{}", u64::from(*j) + offset, v)?;
                }
            }
            Row::Dense(v) => {
                for (j, x) in v.iter().enumerate().filter(|(_, x)| **x != 0.0) {
                    write!(w, " {}:{}", j as u64 + offset, x)?;
                }
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        std::fs::write(&path, "3 1:0.5 4:2\n-1\n").unwrap();
        let opts = SparseTextOptions {
            one_based: true,
            dim: Some(5),
        };
        let (x, y) = load_sparse_text(&path, opts).unwrap();
        assert_eq!((x.n(), x.d()), (2, 5));
        assert_eq!(x.to_dense().as_dense().unwrap(), &[0.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(y.as_slice(), &[Some(3), None]);
    }

    #[test]
    fn zero_based_and_inferred_dim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        std::fs::write(&path, "0 0:1 2:1\n1 1:1\n").unwrap();
        let (x, _) = load_sparse_text(&path, SparseTextOptions::default()).unwrap();
        assert_eq!(x.d(), 3);
        assert_eq!(x.get(0, 0), 1.0);
    }

    #[test]
    fn rejects_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        for bad in ["1 3:1 2:1\n", "1 2:1 2:1\n", "x 1:1\n", "1 1-1\n", "1 1:abc\n"] {
            std::fs::write(&path, bad).unwrap();
            assert!(
                matches!(load_sparse_text(&path, SparseTextOptions::default()), Err(Error::Parse { .. })),
                "{bad:?}"
            );
        }
        std::fs::write(&path, "1 0:1\n").unwrap();
        let one = SparseTextOptions {
            one_based: true,
            dim: None,
        };
        assert!(load_sparse_text(&path, one).is_err());
    }

    #[test]
    fn writer_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        let x = DataMatrix::sparse_from_rows(
            7,
            &[vec![(0, 0.1), (6, 1.0 / 3.0)], vec![], vec![(3, -2.5e-8)]],
        )
        .unwrap();
        let y = LabelVector::new(vec![Some(1), None, Some(12)]);
        for one_based in [false, true] {
            write_sparse_text(&path, &x, &y, one_based).unwrap();
            let opts = SparseTextOptions { one_based, dim: Some(7) };
            assert_eq!(load_sparse_text(&path, opts).unwrap(), (x.clone(), y.clone()));
        }
    }
}
