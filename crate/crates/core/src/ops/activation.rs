use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Passes `grad` through where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(grad: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    if grad.len() != x.len() {
        return Err(Error::shape("relu_backward", x.shape(), grad.shape()));
    }
    let data = grad
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(grad.shape(), data)
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Returns `(-ln softmax(logits)[label], softmax(logits) - onehot(label))`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>)> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::invalid(format!("softmax_cross_entropy needs at least 2 classes, got {k}")));
    }
    if label >= k {
        return Err(Error::invalid(format!("label {label} out of range for {k} classes")));
    }
    let z = logits.data();
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let log_sum = z.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    let loss = -(z[label] - max - log_sum);
    let mut grad = softmax(z);
    grad[label] = grad[label] - T::one();
    // clamp rounding below zero but let NaN through for the divergence guard
    let loss = if loss < T::zero() { T::zero() } else { loss };
    Ok((loss, Tensor::new(logits.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_difference, rand_tensor, rel_err};

    #[test]
    fn relu_examples() {
        let x = Tensor::<f64>::from_f64(&[3], &[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), [0.0, 0.0, 2.0]);
        let neg = Tensor::<f64>::from_f64(&[3], &[-1.0, -0.5, -3.0]).unwrap();
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let g = relu_backward(&Tensor::full(&[3], 1.0), &neg).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_finite_difference_away_from_kink() {
        let x = rand_tensor(&[40], 11).map(|v| if v.abs() < 1e-4 { 0.5 } else { v });
        let probe = rand_tensor(&[40], 12);
        let loss = |t: &Tensor<f64>| relu(t).data().iter().zip(probe.data()).map(|(a, b)| a * b).sum();
        let g = relu_backward(&probe, &x).unwrap();
        assert!(rel_err(g.data(), &central_difference(&x, loss)) < 1e-5);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let (loss, grad) = softmax_cross_entropy(&Tensor::<f64>::zeros(&[10]), 3).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((grad.data()[3] + 0.9).abs() < 1e-12);
    }

    #[test]
    fn confident_logit_gives_zero_loss() {
        let mut z = Tensor::<f64>::zeros(&[10]);
        z.data_mut()[7] = 1000.0;
        let (loss, _) = softmax_cross_entropy(&z, 7).unwrap();
        assert!((0.0..1e-12).contains(&loss));
        assert!(softmax_cross_entropy(&z, 10).is_err());
        assert!(softmax_cross_entropy(&Tensor::<f64>::zeros(&[1]), 0).is_err());
    }

    #[test]
    fn softmax_sums_to_one_and_gradient_matches() {
        for seed in 0..10 {
            let z = rand_tensor(&[7], seed).scale(5.0);
            let s: f64 = softmax(z.data()).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            let (loss, grad) = softmax_cross_entropy(&z, (seed % 7) as usize).unwrap();
            assert!(loss >= 0.0);
            let num = central_difference(&z, |t| softmax_cross_entropy(t, (seed % 7) as usize).unwrap().0);
            let abs_err = grad.data().iter().zip(&num).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(abs_err < 1e-6, "{abs_err}");
            assert!(rel_err(grad.data(), &num) < 1e-6);
        }
    }
}
