//! Finite-difference helpers shared by unit tests, the acceptance suite and
//! the `gradcheck` subcommand.

use crate::error::Result;
use crate::network::{Mode, Network};
use crate::ops::softmax_cross_entropy;
use crate::rng::RandomStream;
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;

/// Central differences of `f` with respect to every element of `x`.
pub fn central_difference(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + STEP;
            let up = f(&probe);
            probe.data_mut()[i] = orig - STEP;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, or the absolute difference norm when both
/// vectors are (near) zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Relative error between backprop and central-difference gradients of the
/// cross-entropy loss with respect to every parameter. The randomness of one
/// train pass drawn from `stream` is frozen and replayed for all probes.
pub fn network_gradient_error(net: &Network<f64>, image: &Tensor<f64>, label: usize, stream: RandomStream) -> Result<f64> {
    let noise = net.forward(image, Mode::Train(stream))?.noise();
    let mut analytic = vec![0.0; net.param_count()];
    net.loss_and_grad(image, label, Mode::Replay(&noise), &mut analytic)?;
    let p0 = Tensor::new(&[net.param_count()], net.params().to_vec())?;
    let mut probe = net.clone();
    let mut failure = None;
    let numeric = central_difference(&p0, |p| {
        probe.set_params(p.data()).expect("same length");
        match probe
            .forward(image, Mode::Replay(&noise))
            .and_then(|t| softmax_cross_entropy(&t.logits, label))
        {
            Ok((loss, _)) => loss,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(relative_error(&analytic, &numeric))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = Tensor::<f64>::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = central_difference(&x, |t| t.data().iter().map(|v| v * v).sum());
        assert!(relative_error(&g, &[2.0, -4.0, 1.0]) < 1e-9);
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
    }
}
