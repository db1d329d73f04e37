//! Mini-batch SGD with momentum and a two-step learning-rate schedule.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::net::{Mode, Network};
use crate::data::LabeledImageSet;
use crate::dropout::DropoutPlacement;
use crate::error::{Error, Result};
use crate::pooling::{TestPooling, TrainPooling};
use crate::rng::RandomStream;
use crate::tensor::Scalar;

/// Examples per gradient shard. Shards are summed in index order, so the
/// batch gradient does not depend on how many threads ran them.
const SHARD: usize = 10;

const LANE_INIT: u64 = 0;
const LANE_SHUFFLE: u64 = 1;
const LANE_DROPOUT: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Epochs at which the learning rate is divided by 10. `None` picks 50%
    /// and 75% of `epochs`.
    pub lr_drop_epochs: Option<Vec<usize>>,
    pub seed: u64,
    pub dropout: DropoutPlacement,
    pub train_pooling: TrainPooling,
    /// Default evaluation rule.
    pub test_pooling: TestPooling,
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            momentum: 0.95,
            learning_rate: 0.1,
            epochs: 30,
            lr_drop_epochs: None,
            seed: 1,
            dropout: DropoutPlacement::none(),
            train_pooling: TrainPooling::Max,
            test_pooling: TestPooling::Max,
            init_std: 0.1,
        }
    }
}

impl TrainConfig {
    /// Resolved schedule. The default needs at least 3 epochs to give two
    /// distinct drop points; shorter runs keep a constant rate.
    pub fn drop_epochs(&self) -> Vec<usize> {
        match &self.lr_drop_epochs {
            Some(d) => d.clone(),
            None if self.epochs >= 3 => vec![self.epochs / 2, self.epochs * 3 / 4],
            None => Vec::new(),
        }
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let drops = self.drop_epochs().iter().filter(|&&d| epoch >= d).count();
        self.learning_rate / 10f64.powi(drops as i32)
    }

    /// Checks that only concern network assembly.
    pub(crate) fn validate_model(&self) -> Result<()> {
        self.dropout.validate()?;
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::invalid(format!("init_std must be positive, got {}", self.init_std)));
        }
        match (self.train_pooling.is_dropout(), self.dropout.pool_input) {
            (true, None) => Err(Error::invalid(format!(
                "train pooling {} needs a pool_input retain probability",
                self.train_pooling.name()
            ))),
            (false, Some(_)) => Err(Error::invalid(format!(
                "pool_input dropout requires a max_dropout train pooling, got {}",
                self.train_pooling.name()
            ))),
            _ => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_model()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        let drops = self.drop_epochs();
        if drops.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("lr_drop_epochs must be strictly increasing, got {drops:?}")));
        }
        if let Some(&bad) = drops.iter().find(|&&d| d >= self.epochs) {
            return Err(Error::invalid(format!(
                "lr_drop_epochs entry {bad} is not below epochs = {}",
                self.epochs
            )));
        }
        Ok(())
    }

    pub fn root_stream(&self) -> RandomStream {
        RandomStream::new(self.seed, 0)
    }

    pub fn init_stream(&self) -> RandomStream {
        self.root_stream().fork(LANE_INIT)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean cross-entropy over the epoch's training examples.
    pub loss: f64,
    /// Misclassification rate of the train-mode (noisy) forward passes.
    pub train_error: f64,
}

/// `v ← μ·v − η·grad`, `w ← w + v`.
pub fn sgd_momentum_update<T: Scalar>(params: &mut [T], velocity: &mut [T], grad: &[T], lr: f64, momentum: f64) {
    let (lr, mu) = (T::lit(lr), T::lit(momentum));
    for ((w, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = mu * *v - lr * g;
        *w = *w + *v;
    }
}

pub struct Trainer<T> {
    pub net: Network<T>,
    velocity: Vec<T>,
    cfg: TrainConfig,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(net: Network<T>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let velocity = vec![T::zero(); net.param_count()];
        Ok(Self { net, velocity, cfg })
    }

    /// Builds a freshly initialised network from `cfg.seed`.
    pub fn from_arch(arch: &super::ArchSpec, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let net = Network::build(arch, &cfg, cfg.init_stream())?;
        Self::new(net, cfg)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn velocity(&self) -> &[T] {
        &self.velocity
    }

    pub fn train_epoch(&mut self, data: &LabeledImageSet, epoch: usize) -> Result<EpochMetrics> {
        let lr = self.cfg.learning_rate_at(epoch);
        self.train_epoch_with_lr(data, epoch, lr)
    }

    /// One pass over `data` in a seed- and epoch-determined order, with an
    /// explicit learning rate (0 leaves the parameters untouched).
    pub fn train_epoch_with_lr(&mut self, data: &LabeledImageSet, epoch: usize, lr: f64) -> Result<EpochMetrics> {
        if data.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        let root = self.cfg.root_stream();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut root.fork(LANE_SHUFFLE).fork(epoch as u64).rng());
        let dropout = root.fork(LANE_DROPOUT);

        let (mut loss_sum, mut errors) = (0.0, 0usize);
        for (b, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let (grad, batch_loss, batch_errors) = self.batch_gradient(data, batch, dropout, epoch)?;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss / batch.len() as f64,
                });
            }
            loss_sum += batch_loss;
            errors += batch_errors;
            if lr != 0.0 {
                let scale = T::lit(1.0 / batch.len() as f64);
                let mean: Vec<T> = grad.into_iter().map(|g| g * scale).collect();
                sgd_momentum_update(self.net.params_mut(), &mut self.velocity, &mean, lr, self.cfg.momentum);
            }
        }
        Ok(EpochMetrics {
            epoch,
            learning_rate: lr,
            loss: loss_sum / data.len() as f64,
            train_error: errors as f64 / data.len() as f64,
        })
    }

    /// Summed gradient, summed loss and error count over one batch.
    fn batch_gradient(
        &self,
        data: &LabeledImageSet,
        batch: &[usize],
        dropout: RandomStream,
        epoch: usize,
    ) -> Result<(Vec<T>, f64, usize)> {
        let net = &self.net;
        let n = net.param_count();
        let shards: Vec<Result<(Vec<T>, f64, usize)>> = batch
            .par_chunks(SHARD)
            .map(|shard| {
                let mut grad = vec![T::zero(); n];
                let (mut loss, mut errors) = (0.0, 0);
                for &i in shard {
                    let stream = dropout.for_example(epoch as u64, i as u64);
                    let (l, pred) = net.loss_and_grad(&data.image(i), data.labels[i], Mode::Train(stream), &mut grad)?;
                    loss += l.as_f64();
                    errors += usize::from(pred != data.labels[i]);
                }
                Ok((grad, loss, errors))
            })
            .collect();
        let mut total = vec![T::zero(); n];
        let (mut loss, mut errors) = (0.0, 0);
        for shard in shards {
            let (g, l, e) = shard?;
            for (t, v) in total.iter_mut().zip(g) {
                *t = *t + v;
            }
            loss += l;
            errors += e;
        }
        Ok((total, loss, errors))
    }
}

/// Classification error of sampling-free test-mode forward passes.
pub fn evaluate<T: Scalar>(net: &Network<T>, data: &LabeledImageSet, rule: TestPooling) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    let wrong = (0..data.len())
        .into_par_iter()
        .map(|i| Ok(usize::from(net.predict(&data.image(i), rule)? != data.labels[i])))
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(wrong as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ArchSpec;

    fn toy_data(n: usize, seed: u64) -> LabeledImageSet {
        use rand::Rng;
        let mut rng = RandomStream::new(seed, 7).rng();
        let mut images = Vec::with_capacity(n * 36);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 3;
            for p in 0..36 {
                // class decides which third of the image is bright
                let bright = p / 12 == label;
                images.push(if bright { 0.8 } else { 0.1 } + rng.random_range(0.0..0.2));
            }
            labels.push(label);
        }
        LabeledImageSet::new([1, 6, 6], images, labels, 3).unwrap()
    }

    #[test]
    fn schedule() {
        let cfg = TrainConfig {
            epochs: 8,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.drop_epochs(), [4, 6]);
        let lrs: Vec<f64> = (0..8).map(|e| cfg.learning_rate_at(e)).collect();
        assert_eq!(lrs[3], 0.1);
        assert!((lrs[4] - 0.01).abs() < 1e-15 && (lrs[7] - 0.001).abs() < 1e-15);
        assert!(TrainConfig { epochs: 2, ..cfg.clone() }.validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig { learning_rate: 0.0, ..ok.clone() },
            TrainConfig { momentum: 1.0, ..ok.clone() },
            TrainConfig { batch_size: 0, ..ok.clone() },
            TrainConfig { lr_drop_epochs: Some(vec![5, 5]), ..ok.clone() },
            TrainConfig { lr_drop_epochs: Some(vec![5, 30]), ..ok.clone() },
            TrainConfig { train_pooling: TrainPooling::MaxDropout, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn momentum_free_step_on_quadratic() {
        // f(w) = (w - 3)^2, grad 2(w - 3); from w = 1 with lr 0.1: w = 1.4
        let mut w = [1.0f64];
        let mut v = [0.0];
        let g = [2.0 * (w[0] - 3.0)];
        sgd_momentum_update(&mut w, &mut v, &g, 0.1, 0.0);
        assert!((w[0] - 1.4).abs() < 1e-15);
        // second step with momentum 0.5: v = 0.5*0.4 - 0.1*(-3.2) = 0.52
        let g = [2.0 * (w[0] - 3.0)];
        sgd_momentum_update(&mut w, &mut v, &g, 0.1, 0.5);
        assert!((v[0] - 0.52).abs() < 1e-15 && (w[0] - 1.92).abs() < 1e-14);
    }

    #[test]
    fn zero_lr_keeps_params() {
        let arch = ArchSpec::parse("1x6x6-2C3-2P2-3N").unwrap();
        let mut t: Trainer<f64> = Trainer::from_arch(&arch, TrainConfig::default()).unwrap();
        let before = t.net.params().to_vec();
        let m = t.train_epoch_with_lr(&toy_data(30, 1), 0, 0.0).unwrap();
        assert_eq!(t.net.params(), before.as_slice());
        assert!(m.loss > 0.0 && (0.0..=1.0).contains(&m.train_error));
    }

    #[test]
    fn learns_toy_problem_deterministically() {
        let arch = ArchSpec::parse("1x6x6-3C3-2P2-3N").unwrap();
        let cfg = TrainConfig {
            batch_size: 10,
            epochs: 5,
            learning_rate: 0.05,
            momentum: 0.9,
            train_pooling: TrainPooling::MaxDropout,
            dropout: DropoutPlacement {
                pool_input: Some(0.5),
                ..DropoutPlacement::none()
            },
            ..TrainConfig::default()
        };
        let data = toy_data(120, 2);
        let run = || {
            let mut t: Trainer<f32> = Trainer::from_arch(&arch, cfg.clone()).unwrap();
            for e in 0..cfg.epochs {
                t.train_epoch(&data, e).unwrap();
            }
            t
        };
        let (a, b) = (run(), run());
        assert_eq!(a.net.params(), b.net.params());
        let err = evaluate(&a.net, &data, TestPooling::ProbWeighted).unwrap();
        assert!(err < 0.2, "{err}");
        assert_eq!(err, evaluate(&a.net, &data, TestPooling::ProbWeighted).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let arch = ArchSpec::parse("1x6x6-2C3-2P2-3N").unwrap();
        let mut t: Trainer<f32> = Trainer::from_arch(&arch, TrainConfig::default()).unwrap();
        let last = t.net.param_count() - 1;
        t.net.params_mut()[last] = f32::NAN;
        assert!(matches!(
            t.train_epoch(&toy_data(20, 3), 0),
            Err(Error::Diverged { epoch: 0, batch: 0, .. })
        ));
    }

    #[test]
    fn untrained_net_near_chance() {
        let arch = ArchSpec::parse("1x6x6-2C3-2P2-3N").unwrap();
        let t: Trainer<f64> = Trainer::from_arch(&arch, TrainConfig::default()).unwrap();
        let err = evaluate(&t.net, &toy_data(300, 4), TestPooling::Max).unwrap();
        assert!(err > 0.3, "{err}");
    }
}
