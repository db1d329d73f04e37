//! CIFAR binary batches. CIFAR-10 records are `label, 3072 pixels`;
//! CIFAR-100 records are `coarse label, fine label, 3072 pixels` and the fine
//! label is used. Pixels are stored channel-major (1024 R, 1024 G, 1024 B).

use std::path::Path;

use super::{format_err, read_file, LabeledImageSet};
use crate::error::{Error, Result};

const PIXELS: usize = 3 * 32 * 32;

fn label_bytes(class_count: usize) -> Result<usize> {
    match class_count {
        10 => Ok(1),
        100 => Ok(2),
        other => Err(Error::invalid(format!("CIFAR class count must be 10 or 100, got {other}"))),
    }
}

/// Loads and concatenates batch files, scaling pixels to `[0, 1]`. No mean
/// subtraction; see [`load_cifar_splits`].
pub fn load_cifar<P: AsRef<Path>>(paths: &[P], class_count: usize) -> Result<LabeledImageSet> {
    let lb = label_bytes(class_count)?;
    let record = lb + PIXELS;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        if bytes.is_empty() || bytes.len() % record != 0 {
            return Err(format_err(
                path,
                format!("file size {} is not a multiple of the {record}-byte record", bytes.len()),
            ));
        }
        for (k, rec) in bytes.chunks_exact(record).enumerate() {
            let label = rec[lb - 1] as usize;
            if label >= class_count {
                return Err(format_err(path, format!("record {k}: label {label} >= {class_count}")));
            }
            labels.push(label);
            images.extend(rec[lb..].iter().map(|&b| b as f32 / 255.0));
        }
    }
    if labels.is_empty() {
        return Err(Error::invalid("no CIFAR batch files given"));
    }
    LabeledImageSet::new([3, 32, 32], images, labels, class_count)
}

/// Per-channel mean over every pixel of every image.
pub fn channel_means(set: &LabeledImageSet) -> Vec<f64> {
    let [c, h, w] = set.dims;
    let plane = h * w;
    let mut sums = vec![0.0f64; c];
    for img in set.images.chunks_exact(c * plane) {
        for (ch, sum) in sums.iter_mut().enumerate() {
            *sum += img[ch * plane..(ch + 1) * plane].iter().map(|&v| v as f64).sum::<f64>();
        }
    }
    let n = (set.len() * plane) as f64;
    sums.into_iter().map(|s| s / n).collect()
}

pub fn subtract_channel_means(set: &mut LabeledImageSet, means: &[f64]) {
    let [c, h, w] = set.dims;
    assert_eq!(means.len(), c, "one mean per channel");
    let plane = h * w;
    for img in set.images.chunks_exact_mut(c * plane) {
        for (ch, &m) in means.iter().enumerate() {
            for v in &mut img[ch * plane..(ch + 1) * plane] {
                *v = (*v as f64 - m) as f32;
            }
        }
    }
}

/// Loads train and test splits, subtracting the training split's channel
/// means from both.
pub fn load_cifar_splits<P: AsRef<Path>, Q: AsRef<Path>>(
    train_paths: &[P],
    test_paths: &[Q],
    class_count: usize,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let mut train = load_cifar(train_paths, class_count)?;
    let mut test = load_cifar(test_paths, class_count)?;
    let means = channel_means(&train);
    subtract_channel_means(&mut train, &means);
    subtract_channel_means(&mut test, &means);
    Ok((train, test))
}

/// Writes records in the binary batch layout. CIFAR-100 records get coarse
/// label 0.
pub fn write_cifar(path: impl AsRef<Path>, class_count: usize, labels: &[u8], pixels: &[u8]) -> Result<()> {
    let lb = label_bytes(class_count)?;
    assert_eq!(pixels.len(), labels.len() * PIXELS, "3072 pixel bytes per label");
    let mut out = Vec::with_capacity(labels.len() * (lb + PIXELS));
    for (&l, px) in labels.iter().zip(pixels.chunks_exact(PIXELS)) {
        if lb == 2 {
            out.push(0);
        }
        out.push(l);
        out.extend_from_slice(px);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_channels(r: u8, g: u8, b: u8) -> Vec<u8> {
        [r, g, b].iter().flat_map(|&v| std::iter::repeat_n(v, 1024)).collect()
    }

    #[test]
    fn constant_record_centres_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("batch.bin");
        write_cifar(&p, 10, &[4], &constant_channels(10, 200, 90)).unwrap();
        let (train, _) = load_cifar_splits(&[&p], &[&p], 10).unwrap();
        assert!(train.images.iter().all(|&v| v.abs() < 1e-6));
        assert_eq!(train.labels, [4]);
    }

    #[test]
    fn cifar100_uses_fine_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.bin");
        write_cifar(&p, 100, &[77, 3], &[constant_channels(0, 0, 0), constant_channels(255, 255, 255)].concat()).unwrap();
        let set = load_cifar(&[&p], 100).unwrap();
        assert_eq!(set.labels, [77, 3]);
        assert_eq!(set.pixel_range(), (0.0, 1.0));
    }

    #[test]
    fn record_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, vec![0u8; 3000]).unwrap();
        assert!(load_cifar(&[&p], 10).is_err());
        write_cifar(&p, 10, &[12], &constant_channels(1, 1, 1)).unwrap();
        assert!(load_cifar(&[&p], 10).unwrap_err().to_string().contains("label 12"));
        assert!(load_cifar(&[&p], 7).is_err());
        assert!(load_cifar::<&Path>(&[], 10).is_err());
    }
}
