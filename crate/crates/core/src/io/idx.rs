//! IDX containers (the MNIST distribution format).

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::data::{DataMatrix, LabelVector};
use crate::error::{invalid, Error, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

fn truncated(what: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::Decode(format!("{what}: file is truncated"))
        } else {
            Error::Io(e)
        }
    }
}

fn read_header(r: &mut impl Read, magic: u32, what: &str) -> Result<()> {
    let found = r.read_u32::<BigEndian>().map_err(truncated(what))?;
    if found != magic {
        return Err(Error::Decode(format!("{what}: magic {found}, expected {magic}")));
    }
    Ok(())
}

/// Images as an `n × (rows·cols)` matrix of raw pixel values, flattened row-major.
pub fn load_idx_images(path: &Path) -> Result<DataMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    read_header(&mut r, IMAGE_MAGIC, "image file")?;
    let mut dims = [0u32; 3];
    for v in &mut dims {
        *v = r.read_u32::<BigEndian>().map_err(truncated("image file"))?;
    }
    let n = dims[0] as usize;
    let d = dims[1] as usize * dims[2] as usize;
    let mut pixels = vec![0u8; n * d];
    r.read_exact(&mut pixels).map_err(truncated("image file"))?;
    DataMatrix::dense(n, d, pixels.into_iter().map(f64::from).collect())
}

pub fn load_idx_labels(path: &Path) -> Result<LabelVector> {
    let mut r = BufReader::new(File::open(path)?);
    read_header(&mut r, LABEL_MAGIC, "label file")?;
    let n = r.read_u32::<BigEndian>().map_err(truncated("label file"))? as usize;
    let mut labels = vec![0u8; n];
    r.read_exact(&mut labels).map_err(truncated("label file"))?;
    Ok(LabelVector::new(labels.into_iter().map(|l| Some(u32::from(l))).collect()))
}

/// Images and labels; the two files must hold the same number of items.
pub fn load_idx(images: &Path, labels: &Path) -> Result<(DataMatrix, LabelVector)> {
    let x = load_idx_images(images)?;
    let y = load_idx_labels(labels)?;
    if x.n() != y.len() {
        return Err(invalid(format!(
            "{} images but {} labels",
            x.n(),
            y.len()
        )));
    }
    Ok((x, y))
}

/// Writes pixel values (integers in 0..=255) as an IDX image file.
pub fn write_idx_images(path: &Path, data: &DataMatrix, rows: usize, cols: usize) -> Result<()> {
    if rows * cols != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            found: rows * cols,
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_u32::<BigEndian>(IMAGE_MAGIC)?;
    for v in [data.n(), rows, cols] {
        w.write_u32::<BigEndian>(v as u32)?;
    }
    for i in 0..data.n() {
        for j in 0..data.d() {
            let v = data.get(i, j);
            if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                return Err(invalid(format!("pixel ({i}, {j}) = {v} is not a byte")));
            }
            w.write_u8(v as u8)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_u32::<BigEndian>(LABEL_MAGIC)?;
    w.write_u32::<BigEndian>(labels.len() as u32)?;
    for (i, l) in labels.as_slice().iter().enumerate() {
        match l {
            Some(c) if *c < 256 => w.write_u8(*c as u8)?,
            _ => return Err(invalid(format!("label {i} does not fit the IDX byte format"))),
        }
    }
    w.flush()?;
    Ok(())
}
