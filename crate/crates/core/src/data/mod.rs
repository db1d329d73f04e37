//! Labeled image datasets: MNIST (IDX) and CIFAR-10/100 (binary batches).

pub mod cifar;
pub mod idx;

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub use cifar::{channel_means, load_cifar, load_cifar_splits, subtract_channel_means, write_cifar};
pub use idx::{load_mnist, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};

/// Preprocessed images in `[count, channels, h, w]` layout plus class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet {
    pub dims: [usize; 3],
    pub images: Vec<f32>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl LabeledImageSet {
    pub fn new(dims: [usize; 3], images: Vec<f32>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let per = dims.iter().product::<usize>();
        if per == 0 || images.len() != per * labels.len() {
            return Err(Error::invalid(format!(
                "{} pixel values do not match {} images of {:?}",
                images.len(),
                labels.len(),
                dims
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::invalid(format!("label {bad} out of range for {class_count} classes")));
        }
        Ok(Self {
            dims,
            images,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn pixels(&self, index: usize) -> &[f32] {
        let n = self.image_len();
        &self.images[index * n..(index + 1) * n]
    }

    pub fn image<T: Scalar>(&self, index: usize) -> Tensor<T> {
        let data = self.pixels(index).iter().map(|&v| T::lit(v as f64)).collect();
        Tensor::new(&self.dims, data).expect("dims validated at construction")
    }

    /// First `count` examples.
    pub fn subset(&self, count: usize) -> Result<Self> {
        if count > self.len() {
            return Err(Error::invalid(format!(
                "subset of {count} requested from a dataset of {}",
                self.len()
            )));
        }
        Ok(Self {
            dims: self.dims,
            images: self.images[..count * self.image_len()].to_vec(),
            labels: self.labels[..count].to_vec(),
            class_count: self.class_count,
        })
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    pub fn pixel_range(&self) -> (f32, f32) {
        self.images
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

pub(crate) fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}
