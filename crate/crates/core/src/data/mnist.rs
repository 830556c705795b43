//! IDX reader for MNIST-format image and label files.
//!
//! Both formats start with a big-endian magic number (`0x00000803` for
//! rank-3 unsigned-byte images, `0x00000801` for rank-1 labels) followed by
//! one big-endian `u32` per dimension and then the raw bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    /// `n * rows * cols` pixels, image-major.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    /// Mean pixel intensity of image `i`, on a [0, 1] scale.
    pub fn mean_intensity(&self, i: usize) -> f64 {
        let img = self.image(i);
        img.iter().map(|&p| f64::from(p)).sum::<f64>() / (255.0 * img.len() as f64)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn u32(&mut self) -> Result<u32> {
        let chunk = self.take(4)?;
        Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                what: self.what,
                expected: end,
                found: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

/// Parses an IDX image file. Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut c = Cursor { bytes, pos: 0, what: "IDX image file" };
    let magic = c.u32()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            what: "IDX image file",
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = c.u32()? as usize;
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let pixels = c.take(n * rows * cols)?.to_vec();
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut c = Cursor { bytes, pos: 0, what: "IDX label file" };
    let magic = c.u32()?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            what: "IDX label file",
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let n = c.u32()? as usize;
    Ok(c.take(n)?.to_vec())
}

/// Loads an image file and its matching label file.
pub fn load_idx(images: &Path, labels: &Path) -> Result<ImageSet> {
    let img_bytes = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lbl_bytes = fs::read(labels).map_err(|e| Error::io(labels, e))?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let labels_vec = parse_idx_labels(&lbl_bytes)?;
    if labels_vec.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} holds {n} images but {} holds {} labels",
            images.display(),
            labels.display(),
            labels_vec.len()
        )));
    }
    if let Some(bad) = labels_vec.iter().find(|&&l| l > 9) {
        return Err(Error::InvalidInput(format!("label {bad} is not a digit")));
    }
    Ok(ImageSet {
        rows,
        cols,
        pixels,
        labels: labels_vec,
    })
}

/// Loads the MNIST training split (`train-images-idx3-ubyte`,
/// `train-labels-idx1-ubyte`) from a directory.
pub fn load_mnist_dir(dir: &Path) -> Result<ImageSet> {
    load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )
}

/// Serializes images to IDX bytes; the inverse of [`parse_idx_images`].
pub fn encode_idx_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for word in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_items() {
        let bytes = encode_idx_images(0, 28, 28, &[]);
        let (n, r, c, px) = parse_idx_images(&bytes).unwrap();
        assert_eq!((n, r, c, px.len()), (0, 28, 28, 0));
        assert!(parse_idx_labels(&encode_idx_labels(&[])).unwrap().is_empty());
    }

    #[test]
    fn bad_magic_reports_both_values() {
        let mut bytes = encode_idx_images(0, 28, 28, &[]);
        bytes[3] = 0x01;
        match parse_idx_images(&bytes) {
            Err(Error::BadMagic { expected, found, .. }) => {
                assert_eq!(expected, 0x803);
                assert_eq!(found, 0x801);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_body() {
        let mut bytes = encode_idx_images(2, 28, 28, &vec![7u8; 2 * 784]);
        bytes.truncate(bytes.len() - 10);
        assert!(matches!(parse_idx_images(&bytes), Err(Error::Truncated { .. })));
        assert!(matches!(parse_idx_labels(&[0, 0]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn handmade_fixture() {
        // Header bytes written out by hand rather than via the encoder.
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28];
        let pixels: Vec<u8> = (0..784).map(|i| (i * 7 % 256) as u8).collect();
        bytes.extend_from_slice(&pixels);
        let (n, r, c, px) = parse_idx_images(&bytes).unwrap();
        assert_eq!((n, r, c), (1, 28, 28));
        assert_eq!(px, pixels);
        let labels = parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 1, 4]).unwrap();
        assert_eq!(labels, vec![4]);
    }
}
