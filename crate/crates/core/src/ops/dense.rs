use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn check<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize)> {
    weights.expect_rank("fc weights", 2)?;
    let (n_out, n_in) = (weights.shape()[0], weights.shape()[1]);
    if input.len() != n_in {
        return Err(Error::shape("fc input", n_in, input.len()));
    }
    Ok((n_out, n_in))
}

/// `weights · input + biases`. Any input shape is accepted and read flat.
pub fn fc_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, biases: &Tensor<T>) -> Result<Tensor<T>> {
    let (n_out, _) = check(input, weights)?;
    if biases.len() != n_out {
        return Err(Error::shape("fc biases", n_out, biases.len()));
    }
    let out = affine(weights.data(), biases.data(), input.data());
    Tensor::new(&[n_out], out)
}

/// `weights · input + biases` on raw row-major slices.
pub(crate) fn affine<T: Scalar>(weights: &[T], biases: &[T], input: &[T]) -> Vec<T> {
    let (n_out, n_in) = (biases.len(), input.len());
    debug_assert_eq!(weights.len(), n_out * n_in);
    let mut out = biases.to_vec();
    T::gemm(
        n_out,
        n_in,
        1,
        T::one(),
        weights,
        n_in as isize,
        1,
        input,
        1,
        1,
        T::one(),
        &mut out,
        1,
        1,
    );
    out
}

#[derive(Clone, Debug)]
pub struct FcGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub biases: Tensor<T>,
}

pub fn fc_backward<T: Scalar>(grad_out: &Tensor<T>, input: &Tensor<T>, weights: &Tensor<T>) -> Result<FcGrads<T>> {
    let (n_out, n_in) = check(input, weights)?;
    if grad_out.len() != n_out {
        return Err(Error::shape("fc grad_out", n_out, grad_out.len()));
    }
    let mut gw = vec![T::zero(); n_out * n_in];
    let mut gi = vec![T::zero(); n_in];
    accumulate(grad_out.data(), input.data(), weights.data(), &mut gw, Some(&mut gi));
    Ok(FcGrads {
        input: Tensor::new(input.shape(), gi)?,
        weights: Tensor::new(weights.shape(), gw)?,
        biases: grad_out.clone().reshape(&[n_out])?,
    })
}

/// `grad_weights += grad_out ⊗ input`; writes `Wᵀ · grad_out` into
/// `grad_input` when given.
pub(crate) fn accumulate<T: Scalar>(
    grad_out: &[T],
    input: &[T],
    weights: &[T],
    grad_weights: &mut [T],
    grad_input: Option<&mut [T]>,
) {
    let (n_out, n_in) = (grad_out.len(), input.len());
    T::gemm(
        n_out,
        1,
        n_in,
        T::one(),
        grad_out,
        1,
        1,
        input,
        n_in as isize,
        1,
        T::one(),
        grad_weights,
        n_in as isize,
        1,
    );
    if let Some(gi) = grad_input {
        T::gemm(
            n_in,
            n_out,
            1,
            T::one(),
            weights,
            1,
            n_in as isize,
            grad_out,
            1,
            1,
            T::zero(),
            gi,
            1,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_difference, rand_tensor, rel_err};

    #[test]
    fn identity_and_bias_only() {
        let x = Tensor::<f64>::from_f64(&[3], &[1.0, -2.0, 3.5]).unwrap();
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(fc_forward(&x, &eye, &Tensor::zeros(&[3])).unwrap().data(), x.data());
        let b = Tensor::from_f64(&[2], &[0.25, -4.0]).unwrap();
        assert_eq!(fc_forward(&x, &Tensor::zeros(&[2, 3]), &b).unwrap().data(), b.data());
    }

    #[test]
    fn matches_dot_loop() {
        let x = rand_tensor(&[5], 1);
        let w = rand_tensor(&[3, 5], 2);
        let b = rand_tensor(&[3], 3);
        let y = fc_forward(&x, &w, &b).unwrap();
        for o in 0..3 {
            let mut acc = b.data()[o];
            for i in 0..5 {
                acc += w.data()[o * 5 + i] * x.data()[i];
            }
            assert!((y.data()[o] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::<f64>::zeros(&[4]);
        assert!(fc_forward(&x, &Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2])).is_err());
        assert!(fc_forward(&x, &Tensor::zeros(&[2, 4]), &Tensor::zeros(&[3])).is_err());
        assert!(fc_backward(&Tensor::zeros(&[3]), &x, &Tensor::zeros(&[2, 4])).is_err());
    }

    #[test]
    fn finite_difference() {
        let x = rand_tensor(&[6], 4);
        let w = rand_tensor(&[4, 6], 5);
        let b = rand_tensor(&[4], 6);
        let probe = rand_tensor(&[4], 7);
        let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            let y = fc_forward(x, w, b).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, c)| a * c).sum()
        };
        let g = fc_backward(&probe, &x, &w).unwrap();
        assert!(rel_err(g.input.data(), &central_difference(&x, |t| loss(t, &w, &b))) < 1e-5);
        assert!(rel_err(g.weights.data(), &central_difference(&w, |t| loss(&x, t, &b))) < 1e-5);
        assert!(rel_err(g.biases.data(), &central_difference(&b, |t| loss(&x, &w, t))) < 1e-5);
    }
}
