//! Convolutional network training with max-pooling dropout, probabilistic
//! weighted pooling, scaled max pooling and stochastic pooling.

pub mod counting;
pub mod data;
pub mod dropout;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod network;
pub mod ops;
pub mod pooling;
pub mod rng;
pub mod selfcheck;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{ArchError, Error, Result};
pub use rng::RandomStream;
pub use tensor::{Scalar, Tensor};
