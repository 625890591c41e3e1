//! IDX binary format reader (the MNIST file layout).
//!
//! Images: big-endian u32 magic 0x00000803, then u32 count, rows, cols,
//! then `count * rows * cols` u8 pixels. Labels: magic 0x00000801, u32
//! count, then `count` u8 labels. Pixels are scaled to `[0, 1]` by 255.

use crate::data::Dataset;
use crate::error::{Result, SimError};
use crate::linalg::Matrix;
use std::path::Path;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Reader<'a> {
        Reader { bytes, offset: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> SimError {
        SimError::Ingest {
            offset: self.offset as u64,
            msg: msg.into(),
        }
    }

    fn read_u32_be(&mut self) -> Result<u32> {
        if self.offset + 4 > self.bytes.len() {
            return Err(self.err("truncated file while reading u32"));
        }
        let v = u32::from_be_bytes(
            self.bytes[self.offset..self.offset + 4]
                .try_into()
                .expect("4 bytes"),
        );
        self.offset += 4;
        Ok(v)
    }

    fn read_bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(self.err(format!(
                "truncated file: wanted {n} bytes, {} remain",
                self.bytes.len() - self.offset
            )));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }
}

/// Parse an IDX image file into a row-per-image matrix with pixels in `[0,1]`.
pub fn parse_images(bytes: &[u8]) -> Result<Matrix> {
    let mut r = Reader::new(bytes);
    let magic = r.read_u32_be()?;
    if magic != IMAGES_MAGIC {
        return Err(SimError::Ingest {
            offset: 0,
            msg: format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32_be()? as usize;
    let rows = r.read_u32_be()? as usize;
    let cols = r.read_u32_be()? as usize;
    let dim = rows * cols;
    let pixels = r.read_bytes(count * dim)?;
    if r.offset != bytes.len() {
        return Err(SimError::Ingest {
            offset: r.offset as u64,
            msg: format!("{} trailing bytes after image payload", bytes.len() - r.offset),
        });
    }
    let data = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    Matrix::from_vec(count, dim, data)
}

/// Parse an IDX label file.
pub fn parse_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let mut r = Reader::new(bytes);
    let magic = r.read_u32_be()?;
    if magic != LABELS_MAGIC {
        return Err(SimError::Ingest {
            offset: 0,
            msg: format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32_be()? as usize;
    let raw = r.read_bytes(count)?;
    if r.offset != bytes.len() {
        return Err(SimError::Ingest {
            offset: r.offset as u64,
            msg: format!("{} trailing bytes after label payload", bytes.len() - r.offset),
        });
    }
    Ok(raw.iter().map(|&b| b as usize).collect())
}

/// Load a dataset from a pair of IDX files. The class count is the largest
/// label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let features = parse_images(&image_bytes)?;
    let labels = parse_labels(&label_bytes)?;
    if features.rows() != labels.len() {
        return Err(SimError::Ingest {
            offset: 0,
            msg: format!(
                "image count {} does not match label count {}",
                features.rows(),
                labels.len()
            ),
        });
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1).max(1);
    Dataset::new(features, labels, n_classes)
}
