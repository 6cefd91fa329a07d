//! Comma-separated dense matrices with an optional label column.
//!
//! A first line is taken as a header when any of its fields does not parse
//! as a number. Labels are integers; a negative label marks the row unlabeled.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::data::{DataMatrix, LabelVector};
use crate::error::{invalid, Error, Result};

fn parse_label(field: &str, line: usize) -> Result<Option<u32>> {
    let v: i64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("label {field:?} is not an integer"),
    })?;
    Ok(if v < 0 { None } else { Some(v as u32) })
}

/// Reads a dense matrix. `label_column` picks a column to split off as labels.
pub fn load_dense_csv(path: &Path, label_column: Option<usize>) -> Result<(DataMatrix, Option<LabelVector>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(File::open(path)?));
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if i == 0 && record.iter().any(|f| f.trim().parse::<f64>().is_err()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("{} fields, expected {w}", record.len()),
                })
            }
            _ => {}
        }
        if let Some(c) = label_column {
            if c >= record.len() {
                return Err(invalid(format!("label column {c} out of range for {} columns", record.len())));
            }
        }
        for (j, field) in record.iter().enumerate() {
            if Some(j) == label_column {
                labels.push(parse_label(field, line)?);
                continue;
            }
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("missing value in column {j}"),
                });
            }
            values.push(field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("{field:?} is not a number"),
            })?);
        }
        n += 1;
    }
    let d = width.unwrap_or(0) - usize::from(label_column.is_some() && width.is_some());
    let data = DataMatrix::dense(n, d, values)?;
    Ok((data, label_column.map(|_| LabelVector::new(labels))))
}

/// Writes `data` with full round-trip precision. Labels, when given, go in the
/// first column with -1 for unlabeled rows.
pub fn write_dense_csv(path: &Path, data: &DataMatrix, labels: Option<&LabelVector>) -> Result<()> {
    if let Some(y) = labels {
        if y.len() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                found: y.len(),
            });
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| invalid(e.to_string()))?;
    let mut fields = Vec::with_capacity(data.d() + 1);
    for i in 0..data.n() {
        fields.clear();
        if let Some(y) = labels {
            fields.push(y.get(i).map_or("-1".to_string(), |c| c.to_string()));
        }
        fields.extend((0..data.d()).map(|j| data.get(i, j).to_string()));
        w.write_record(&fields).map_err(|e| invalid(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
