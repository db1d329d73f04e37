//! Non-pooling layer primitives.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod init;

pub use activation::{relu, relu_backward, softmax, softmax_cross_entropy};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads};
pub use dense::{fc_backward, fc_forward, FcGrads};
pub use init::gaussian_init;
