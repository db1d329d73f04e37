//! Bernoulli dropout on layer inputs, with scale-at-test model averaging.

use rand::Rng;

use crate::error::{Error, Result};
use crate::pooling::region::check_retain;
use crate::rng::RandomStream;
use crate::tensor::{Scalar, Tensor};

/// Retain probability of one dropout site; `None` disables it.
pub type Site = Option<f64>;

/// Where dropout is applied, each site with its own retain probability.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DropoutPlacement {
    /// Inputs of convolutional layers.
    pub conv_input: Site,
    /// Also drop raw image pixels feeding the first convolution.
    pub conv_on_image: bool,
    /// Inputs of pooling layers (max-pooling dropout). Only meaningful with a
    /// dropout training pooling mode.
    pub pool_input: Site,
    /// Input of the first fully-connected layer.
    pub fc_first_input: Site,
    /// Inputs of later fully-connected layers, including the classifier.
    pub fc_input: Site,
}

impl DropoutPlacement {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, site) in [
            ("conv_input", self.conv_input),
            ("pool_input", self.pool_input),
            ("fc_first_input", self.fc_first_input),
            ("fc_input", self.fc_input),
        ] {
            if let Some(p) = site {
                check_retain(p).map_err(|e| Error::invalid(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// `input ∘ mask` with mask entries i.i.d. Bernoulli(`retain_p`).
pub fn dropout_train<T: Scalar>(input: &Tensor<T>, retain_p: f64, stream: RandomStream) -> Result<(Tensor<T>, Vec<bool>)> {
    check_retain(retain_p)?;
    let mut rng = stream.rng();
    let mask: Vec<bool> = (0..input.len()).map(|_| rng.random_bool(retain_p)).collect();
    let masked = apply_mask(input, &mask)?;
    Ok((masked, mask))
}

/// Elementwise product with a stored mask; forward replay and backward both
/// use this.
pub fn apply_mask<T: Scalar>(input: &Tensor<T>, mask: &[bool]) -> Result<Tensor<T>> {
    if mask.len() != input.len() {
        return Err(Error::shape("dropout mask", input.len(), mask.len()));
    }
    let data = input
        .data()
        .iter()
        .zip(mask)
        .map(|(&v, &keep)| if keep { v } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

/// Test-time model averaging: `retain_p * input`.
pub fn dropout_test_scale<T: Scalar>(input: &Tensor<T>, retain_p: f64) -> Tensor<T> {
    if retain_p == 1.0 {
        return input.clone();
    }
    input.scale(T::lit(retain_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::fc_forward;
    use crate::testutil::{central_difference, rand_tensor, rel_err};

    #[test]
    fn retain_one_is_identity() {
        let x = rand_tensor(&[3, 5, 5], 1);
        let (y, mask) = dropout_train(&x, 1.0, RandomStream::new(1, 0)).unwrap();
        assert!(mask.iter().all(|&k| k));
        assert_eq!(y, x);
        assert_eq!(dropout_test_scale(&x, 1.0), x);
    }

    #[test]
    fn zero_fraction_and_mean() {
        let n = 100_000;
        let x = Tensor::<f64>::full(&[n], 2.0);
        let p = 0.3;
        let (y, _) = dropout_train(&x, p, RandomStream::new(4, 2)).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros - (1.0 - p)).abs() < 3.0 * sigma, "{zeros}");
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - p * 2.0).abs() < 3.0 * 2.0 * sigma);
    }

    #[test]
    fn reproducible_and_validated() {
        let x = rand_tensor(&[50], 2);
        let a = dropout_train(&x, 0.5, RandomStream::new(8, 1)).unwrap();
        let b = dropout_train(&x, 0.5, RandomStream::new(8, 1)).unwrap();
        assert_eq!(a.1, b.1);
        assert!(dropout_train(&x, 0.0, RandomStream::new(8, 1)).is_err());
        assert!(dropout_train(&x, 1.2, RandomStream::new(8, 1)).is_err());
    }

    #[test]
    fn test_scale_halves() {
        let x = rand_tensor(&[6], 3);
        let y = dropout_test_scale(&x, 0.5);
        for (a, b) in y.data().iter().zip(x.data()) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn activation_scaling_equals_weight_scaling() {
        let x = rand_tensor(&[5], 4);
        let w = rand_tensor(&[3, 5], 5);
        let b = rand_tensor(&[3], 6);
        let via_input = fc_forward(&dropout_test_scale(&x, 0.8), &w, &b).unwrap();
        let via_weights = fc_forward(&x, &w.scale(0.8), &b).unwrap();
        for (a, c) in via_input.data().iter().zip(via_weights.data()) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_mask_gradient() {
        let x = rand_tensor(&[30], 7);
        let probe = rand_tensor(&[30], 8);
        let (_, mask) = dropout_train(&x, 0.5, RandomStream::new(3, 3)).unwrap();
        let analytic = apply_mask(&probe, &mask).unwrap();
        let numeric = central_difference(&x, |t| {
            apply_mask(t, &mask).unwrap().data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        });
        assert!(rel_err(analytic.data(), &numeric) < 1e-5);
    }

    #[test]
    fn placement_validation() {
        let mut p = DropoutPlacement::none();
        assert!(p.validate().is_ok());
        p.fc_input = Some(0.0);
        assert!(p.validate().is_err());
    }
}
