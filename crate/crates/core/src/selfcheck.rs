//! Oracle suites behind the `gradcheck` subcommand. Each check reports a
//! measured error next to the tolerance it must stay under.

use rand::Rng;

use crate::counting::{base_b, log_count_ratio, CountFlavor, CountQuery};
use crate::dropout::DropoutPlacement;
use crate::error::Result;
use crate::gradcheck::network_gradient_error;
use crate::network::{build_network, ArchSpec, Network, TrainConfig};
use crate::pooling::{
    enumerate_mask_distribution, prob_weighted_pool, prob_weighted_value, region_distribution_maxdrop,
    region_distribution_stochastic, stochastic_pool_test, PoolSpec, TestPooling, TrainPooling,
};
use crate::rng::RandomStream;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.error < self.tolerance
    }
}

pub const REGION_SIZES: [usize; 4] = [2, 4, 9, 12];
pub const RETAIN_PS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Random regions with activations uniform in `[0, 10)`, cycling through
/// [`REGION_SIZES`] and [`RETAIN_PS`].
pub fn region_corpus(count: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = RandomStream::new(seed, 0).rng();
    (0..count)
        .map(|k| {
            let n = REGION_SIZES[k % REGION_SIZES.len()];
            let p = RETAIN_PS[(k / REGION_SIZES.len()) % RETAIN_PS.len()];
            ((0..n).map(|_| rng.random_range(0.0..10.0)).collect(), p)
        })
        .collect()
}

/// Largest per-outcome mass difference between mask enumeration and the
/// closed-form selection distribution.
pub fn multinomial_equivalence_error(corpus: &[(Vec<f64>, f64)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (acts, p) in corpus {
        let exact = enumerate_mask_distribution(acts, *p)?;
        let closed = region_distribution_maxdrop(acts, *p)?.value_masses();
        if exact.outcomes.len() != closed.len() {
            return Ok(f64::INFINITY);
        }
        for ((v1, m1), (v2, m2)) in exact.outcomes.iter().zip(&closed) {
            if v1 != v2 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((m1 - m2).abs());
        }
    }
    Ok(worst)
}

/// Largest difference between the probabilistic weighted value and the
/// enumerated expectation. Square regions also go through the layer path.
pub fn expectation_identity_error(corpus: &[(Vec<f64>, f64)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (acts, p) in corpus {
        let exact = enumerate_mask_distribution(acts, *p)?.expectation();
        worst = worst.max((prob_weighted_value(&mut acts.clone(), *p) - exact).abs());
        let side = (acts.len() as f64).sqrt().round() as usize;
        if side * side == acts.len() {
            let spec = PoolSpec::new(side, side, TrainPooling::MaxDropout, TestPooling::ProbWeighted, *p)?;
            let t = Tensor::new(&[1, side, side], acts.clone())?;
            worst = worst.max((prob_weighted_pool(&t, &spec)?.data()[0] - exact).abs());
        }
    }
    Ok(worst)
}

/// Small net used for the full-network gradient checks (well under 5,000
/// parameters).
pub const GRADCHECK_ARCH: &str = "1x10x10-3C3-2P2-4C2-6N-5N";

pub fn gradcheck_network(train: TrainPooling, seed: u64) -> Result<Network<f64>> {
    let cfg = TrainConfig {
        train_pooling: train,
        dropout: DropoutPlacement {
            conv_input: Some(0.9),
            pool_input: train.is_dropout().then_some(0.5),
            fc_first_input: Some(0.8),
            fc_input: Some(0.5),
            ..DropoutPlacement::none()
        },
        ..TrainConfig::default()
    };
    let arch = ArchSpec::parse(GRADCHECK_ARCH)?;
    let mut net: Network<f64> = build_network(&arch, &cfg, RandomStream::new(seed, 0))?;
    // small positive biases keep pre-activations off the ReLU kink
    for v in net.params_mut().iter_mut().filter(|v| **v == 0.0) {
        *v = 0.01;
    }
    Ok(net)
}

pub fn network_gradcheck(train: TrainPooling, seed: u64) -> Result<f64> {
    let net = gradcheck_network(train, seed)?;
    let mut rng = RandomStream::new(seed, 1).rng();
    let x = Tensor::new(&[1, 10, 10], (0..100).map(|_| rng.random_range(0.0..1.0)).collect())?;
    network_gradient_error(&net, &x, 3, RandomStream::new(seed, 2))
}

pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let mut push = |name: &str, error: f64, tolerance: f64| {
        out.push(CheckOutcome {
            name: name.to_string(),
            error,
            tolerance,
        })
    };
    let corpus = region_corpus(1000, seed);
    push("max-pooling dropout: enumeration vs closed form", multinomial_equivalence_error(&corpus)?, 1e-12);
    push("prob-weighted value vs enumerated expectation", expectation_identity_error(&corpus)?, 1e-12);

    let region = [1.0f64, 6.0, 5.0, 3.0];
    let t = Tensor::new(&[1, 2, 2], region.to_vec())?;
    let spec = PoolSpec::new(2, 2, TrainPooling::Stochastic, TestPooling::StochasticWeighted, 1.0)?;
    push(
        "stochastic test output on (1,6,5,3)",
        (stochastic_pool_test(&t, &spec)?.data()[0] - 71.0 / 15.0).abs(),
        1e-12,
    );
    let d = region_distribution_stochastic(&region)?;
    push("stochastic expectation on (1,6,5,3)", (d.expectation() - 71.0 / 15.0).abs(), 1e-12);

    push(
        "b(4) max-pooling dropout = 5^(1/4)",
        (base_b(4, CountFlavor::MaxPoolDropout)? - 5f64.powf(0.25)).abs(),
        1e-12,
    );
    push(
        "b(4) stochastic = 4^(1/4)",
        (base_b(4, CountFlavor::Stochastic)? - 4f64.powf(0.25)).abs(),
        1e-12,
    );
    let ratio = log_count_ratio(
        &CountQuery::new(96, 1024, 4, CountFlavor::MaxPoolDropout),
        &CountQuery::new(96, 1024, 4, CountFlavor::Stochastic),
    )?;
    let want = 24576.0 * 1.25f64.ln();
    push("log count ratio r=96 s=1024 t=4 (relative)", ((ratio - want) / want).abs(), 1e-9);

    for train in TrainPooling::ALL {
        push(
            &format!("network gradient, train pooling {}", train.name()),
            network_gradcheck(train, seed)?,
            1e-5,
        );
    }
    Ok(out)
}
