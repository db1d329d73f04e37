//! Pooling schemes: deterministic max, max-pooling dropout (mask and
//! multinomial paths), scaled max and probabilistic weighted pooling for
//! test time, and stochastic pooling.

mod layer;
pub mod oracle;
pub mod region;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use layer::{
    gather_selected, max_pool, max_pool_dropout_forward, max_pool_dropout_sampled, max_pool_masked, pool_backward,
    pool_test, pool_train, prob_weighted_pool, prob_weighted_value, scaled_max_pool, stochastic_pool_forward, stochastic_pool_test,
    PoolTrace, Selection,
};
pub use oracle::{enumerate_mask_distribution, ValueDistribution};
pub use region::{
    region_distribution_maxdrop, region_distribution_stochastic, sample_pooled_activation, PooledSample,
    RegionDistribution, RegionFlavor,
};

/// Pooling applied at training time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrainPooling {
    Max,
    /// One Bernoulli mask over the whole layer input, then max over retained units.
    MaxDropout,
    /// Per-region draw from the max-dropout selection distribution.
    MaxDropoutMultinomial,
    Stochastic,
}

/// Pooling applied at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestPooling {
    Max,
    ScaledMax,
    ProbWeighted,
    StochasticWeighted,
}

impl TrainPooling {
    pub const ALL: [TrainPooling; 4] = [
        TrainPooling::Max,
        TrainPooling::MaxDropout,
        TrainPooling::MaxDropoutMultinomial,
        TrainPooling::Stochastic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainPooling::Max => "max",
            TrainPooling::MaxDropout => "max_dropout",
            TrainPooling::MaxDropoutMultinomial => "max_dropout_multinomial",
            TrainPooling::Stochastic => "stochastic",
        }
    }

    pub fn is_dropout(self) -> bool {
        matches!(self, TrainPooling::MaxDropout | TrainPooling::MaxDropoutMultinomial)
    }
}

impl TestPooling {
    pub const ALL: [TestPooling; 4] = [
        TestPooling::Max,
        TestPooling::ScaledMax,
        TestPooling::ProbWeighted,
        TestPooling::StochasticWeighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestPooling::Max => "max",
            TestPooling::ScaledMax => "scaled_max",
            TestPooling::ProbWeighted => "prob_weighted",
            TestPooling::StochasticWeighted => "stochastic_weighted",
        }
    }
}

impl fmt::Display for TrainPooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for TestPooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainPooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let hint = if TestPooling::from_str(s).is_ok() {
                    " (that is a test-time pooling mode)"
                } else {
                    ""
                };
                Error::invalid(format!(
                    "unknown training pooling mode '{s}'{hint}; expected one of max, max_dropout, max_dropout_multinomial, stochastic"
                ))
            })
    }
}

impl FromStr for TestPooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown test pooling mode '{s}'; expected one of max, scaled_max, prob_weighted, stochastic_weighted"
            ))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
    pub train: TrainPooling,
    pub test: TestPooling,
    pub retain_p: f64,
}

impl PoolSpec {
    pub fn new(window: usize, stride: usize, train: TrainPooling, test: TestPooling, retain_p: f64) -> Result<Self> {
        if window == 0 || stride == 0 {
            return Err(Error::invalid(format!("pool window and stride must be positive, got {window}P{stride}")));
        }
        if stride > window {
            return Err(Error::invalid(format!("pool stride {stride} exceeds window {window}")));
        }
        region::check_retain(retain_p)?;
        Ok(Self {
            window,
            stride,
            train,
            test,
            retain_p,
        })
    }

    /// Plain max pooling at train and test time.
    pub fn max(window: usize, stride: usize) -> Result<Self> {
        Self::new(window, stride, TrainPooling::Max, TestPooling::Max, 1.0)
    }

    pub fn region_size(&self) -> usize {
        self.window * self.window
    }

    /// Output side for an input side, or `None` when the window does not fit.
    pub fn out_side(&self, side: usize) -> Option<usize> {
        (side >= self.window).then(|| (side - self.window) / self.stride + 1)
    }
}
