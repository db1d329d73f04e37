use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::tensor::{Scalar, Tensor};

/// I.i.d. `N(0, std²)` draws, fully determined by `stream`.
pub fn gaussian_init<T: Scalar>(stream: RandomStream, shape: &[usize], std: f64) -> Result<Tensor<T>> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::invalid(format!("gaussian_init: std must be positive, got {std}")));
    }
    let normal = Normal::new(0.0, std).expect("validated std");
    let mut rng = stream.rng();
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| T::lit(normal.sample(&mut rng))).collect())
}
