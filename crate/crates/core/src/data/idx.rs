//! IDX container: big-endian magic (`0x00000803` images, `0x00000801`
//! labels), big-endian u32 dimensions, then raw unsigned bytes.

use std::path::Path;

use super::{format_err, read_file, LabeledImageSet};
use crate::error::Result;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn read_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0).ok_or_else(|| format_err(path, "truncated IDX header"))?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(path, format!("bad IDX image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let header: Option<Vec<usize>> = (1..4).map(|k| be_u32(bytes, 4 * k).map(|v| v as usize)).collect();
    let [count, rows, cols] = header
        .ok_or_else(|| format_err(path, "truncated IDX header"))?
        .try_into()
        .expect("three dimensions");
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(format_err(
            path,
            format!("truncated IDX image data: header promises {need} bytes, file has {}", body.len()),
        ));
    }
    if body.len() > need {
        return Err(format_err(path, format!("{} trailing bytes after IDX image data", body.len() - need)));
    }
    Ok((count, rows, cols, body.to_vec()))
}

pub fn read_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0).ok_or_else(|| format_err(path, "truncated IDX header"))?;
    if magic != LABELS_MAGIC {
        return Err(format_err(path, format!("bad IDX label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4).ok_or_else(|| format_err(path, "truncated IDX header"))? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(format_err(
            path,
            format!("IDX label header promises {count} labels, file has {}", body.len()),
        ));
    }
    Ok(body.to_vec())
}

/// Loads an MNIST image/label pair with pixels scaled to `[0, 1]`.
pub fn load_mnist(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let (count, rows, cols, pixels) = read_idx_images(&read_file(images_path)?, images_path)?;
    let labels = read_idx_labels(&read_file(labels_path)?, labels_path)?;
    if labels.len() != count {
        return Err(format_err(
            labels_path,
            format!("{} labels but {count} images in {}", labels.len(), images_path.display()),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(format_err(labels_path, format!("label {bad} outside 0..=9")));
    }
    let images = pixels.iter().map(|&b| b as f32 / 255.0).collect();
    LabeledImageSet::new([1, rows, cols], images, labels.into_iter().map(usize::from).collect(), 10)
}

pub fn write_idx_images(path: impl AsRef<Path>, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    assert!(rows * cols > 0 && pixels.len().is_multiple_of(rows * cols), "pixels must hold whole images");
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::write(path, out)?;
    Ok(())
}
