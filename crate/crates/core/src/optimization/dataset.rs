//! Ingestion of external datasets for one-vs-rest logistic runs: IDX
//! containers (big-endian, unsigned-byte payload) and labeled CSV.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A decoded IDX array of unsigned bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses an IDX byte buffer. Only the unsigned-byte element type (0x08)
/// is accepted.
pub fn read_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(Error::Dataset("idx: truncated header".into()));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 {
        return Err(Error::Dataset(format!("idx: unsupported magic {magic:#010x}")));
    }
    let ndims = bytes[3] as usize;
    let header = 4 + 4 * ndims;
    if ndims == 0 || bytes.len() < header {
        return Err(Error::Dataset("idx: truncated dimension table".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count: usize = dims.iter().product();
    if bytes.len() != header + count {
        return Err(Error::Dataset(format!(
            "idx: expected {count} payload bytes, found {}",
            bytes.len() - header
        )));
    }
    Ok(IdxArray { magic, dims, data: bytes[header..].to_vec() })
}

/// Binary-labeled feature matrix, row-major, labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Images scaled to `[0, 1]`; label `+1` for `positive_class`, `-1` otherwise.
    pub fn from_idx(images: &Path, labels: &Path, positive_class: u8, max_samples: Option<usize>) -> Result<Self> {
        let img_bytes = fs::read(images).map_err(|e| Error::io(images, e))?;
        let lbl_bytes = fs::read(labels).map_err(|e| Error::io(labels, e))?;
        Self::from_idx_bytes(&img_bytes, &lbl_bytes, positive_class, max_samples)
    }

    pub fn from_idx_bytes(images: &[u8], labels: &[u8], positive_class: u8, max_samples: Option<usize>) -> Result<Self> {
        let img = read_idx(images)?;
        let lbl = read_idx(labels)?;
        if img.magic != IDX_IMAGES_MAGIC {
            return Err(Error::Dataset(format!("idx images: magic {:#010x}, expected 0x00000803", img.magic)));
        }
        if lbl.magic != IDX_LABELS_MAGIC {
            return Err(Error::Dataset(format!("idx labels: magic {:#010x}, expected 0x00000801", lbl.magic)));
        }
        let n = img.dims[0];
        if lbl.dims[0] != n {
            return Err(Error::Dataset(format!("idx: {n} images but {} labels", lbl.dims[0])));
        }
        let dim = img.dims[1] * img.dims[2];
        let take = max_samples.map_or(n, |m| m.min(n));
        let features = img.data[..take * dim].iter().map(|&b| b as f64 / 255.0).collect();
        let labels = lbl.data[..take]
            .iter()
            .map(|&l| if l == positive_class { 1.0 } else { -1.0 })
            .collect();
        Ok(Dataset { features, labels, dim })
    }

    /// Rows of `label,feature,...`. A first row that does not parse as
    /// numbers is treated as a header.
    pub fn from_labeled_csv(path: &Path, positive_class: f64, max_samples: Option<usize>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        read_labeled_csv(&text, positive_class, max_samples)
    }
}

pub fn read_labeled_csv(text: &str, positive_class: f64, max_samples: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Dataset(format!("csv row {}: {e}", i + 1))),
        };
        if row.len() < 2 {
            return Err(Error::Dataset(format!("csv row {}: need a label and at least one feature", i + 1)));
        }
        let d = *dim.get_or_insert(row.len() - 1);
        if row.len() - 1 != d {
            return Err(Error::Dataset(format!("csv row {}: expected {d} features, got {}", i + 1, row.len() - 1)));
        }
        labels.push(if row[0] == positive_class { 1.0 } else { -1.0 });
        features.extend_from_slice(&row[1..]);
        if max_samples.is_some_and(|m| labels.len() >= m) {
            break;
        }
    }
    let dim = dim.ok_or_else(|| Error::Dataset("csv: no data rows".into()))?;
    Ok(Dataset { features, labels, dim })
}
