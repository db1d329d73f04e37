use std::path::Path;

use pooldrop::data::{write_idx_images, write_idx_labels};

/// Writes a small learnable MNIST-format dataset: class `k` lights up a bar
/// at rows `2k..2k+3`, plus deterministic speckle.
pub fn write_toy_mnist(dir: &Path, train: usize, test: usize) {
    for (prefix, count, salt) in [("train", train, 0usize), ("t10k", test, 7919)] {
        let mut pixels = Vec::with_capacity(count * 784);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let label = (i * 7 + salt) % 10;
            labels.push(label as u8);
            for r in 0..28 {
                for c in 0..28 {
                    let bar = r >= 2 * label + 3 && r < 2 * label + 6 && c > 4 && c < 24;
                    let speckle = ((i + salt) * 31 + r * 17 + c * 13) % 97 < 5;
                    pixels.push(if bar { 230 } else if speckle { 90 } else { 0 });
                }
            }
        }
        write_idx_images(dir.join(format!("{prefix}-images-idx3-ubyte")), 28, 28, &pixels).unwrap();
        write_idx_labels(dir.join(format!("{prefix}-labels-idx1-ubyte")), &labels).unwrap();
    }
}
