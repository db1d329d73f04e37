use rand::Rng;

use crate::rng::RandomStream;
use crate::tensor::Tensor;

pub use crate::gradcheck::{central_difference, relative_error as rel_err};

/// Uniform values in [-1, 1).
pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = RandomStream::new(seed, 0xfeed).rng();
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Uniform values in [lo, hi).
pub fn rand_vec(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = RandomStream::new(seed, 0xbeef).rng();
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}
