//! Selection distributions over a single pooling region.
//!
//! Max-pooling dropout over a region of `n` units picks the `i`-th smallest
//! activation exactly when that unit survives and every larger unit is
//! dropped, so with retain probability `p` and `q = 1 - p`:
//!
//! ```text
//! p_i = p * q^(n - i)   (i = 1..n, activations sorted ascending)
//! p_0 = q^n             (every unit dropped, pooled value 0)
//! ```
//!
//! Stochastic pooling instead samples unit `i` with probability
//! `a_i / sum_k a_k`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionFlavor {
    MaxDropout,
    Stochastic,
}

/// Outcome distribution of one pooling region.
///
/// `probs[0]` is the mass of the "nothing selected" outcome with pooled value
/// 0; `probs[i]` for `i >= 1` is the mass of `acts[i - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionDistribution<T> {
    pub flavor: RegionFlavor,
    /// Sorted non-decreasing for [`RegionFlavor::MaxDropout`] (stable on ties);
    /// original region order for [`RegionFlavor::Stochastic`].
    pub acts: Vec<T>,
    /// Region position of each entry of `acts`.
    pub source: Vec<usize>,
    pub probs: Vec<T>,
}

/// One draw from a [`RegionDistribution`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PooledSample<T> {
    pub value: T,
    /// Region position of the selected unit, `None` for the all-dropped event.
    pub source: Option<usize>,
}

fn check_non_negative<T: Scalar>(acts: &[T]) -> Result<()> {
    if acts.is_empty() {
        return Err(Error::invalid("pooling region must contain at least one unit"));
    }
    for (index, &a) in acts.iter().enumerate() {
        if !(a >= T::zero()) {
            return Err(Error::NegativeActivation { index, value: a.as_f64() });
        }
    }
    Ok(())
}

pub(crate) fn check_retain<T: Scalar>(retain_p: T) -> Result<()> {
    if !(retain_p > T::zero() && retain_p <= T::one()) {
        return Err(Error::invalid(format!(
            "retain probability must lie in (0, 1], got {:?}",
            retain_p
        )));
    }
    Ok(())
}

pub fn region_distribution_maxdrop<T: Scalar>(acts: &[T], retain_p: T) -> Result<RegionDistribution<T>> {
    check_non_negative(acts)?;
    check_retain(retain_p)?;
    let n = acts.len();
    let mut source: Vec<usize> = (0..n).collect();
    // sort_by is stable: equal activations keep their region order
    source.sort_by(|&a, &b| acts[a].partial_cmp(&acts[b]).expect("finite activations"));
    let sorted = source.iter().map(|&i| acts[i]).collect();

    let q = T::one() - retain_p;
    let mut probs = vec![T::zero(); n + 1];
    let mut weight = retain_p;
    for i in (1..=n).rev() {
        probs[i] = weight;
        weight = weight * q;
    }
    probs[0] = q.powi(n as i32);
    Ok(RegionDistribution {
        flavor: RegionFlavor::MaxDropout,
        acts: sorted,
        source,
        probs,
    })
}

/// Magnitude-proportional distribution. An all-zero region gets uniform
/// probabilities; every outcome is 0 in that case anyway.
pub fn region_distribution_stochastic<T: Scalar>(acts: &[T]) -> Result<RegionDistribution<T>> {
    check_non_negative(acts)?;
    let n = acts.len();
    let total: T = acts.iter().copied().sum();
    let mut probs = Vec::with_capacity(n + 1);
    probs.push(T::zero());
    if total > T::zero() {
        probs.extend(acts.iter().map(|&a| a / total));
    } else {
        probs.extend(std::iter::repeat_n(T::one() / T::lit(n as f64), n));
    }
    Ok(RegionDistribution {
        flavor: RegionFlavor::Stochastic,
        acts: acts.to_vec(),
        source: (0..n).collect(),
        probs,
    })
}

impl<T: Scalar> RegionDistribution<T> {
    /// `sum_i p_i a_i`, the mean pooled value.
    pub fn expectation(&self) -> T {
        self.acts
            .iter()
            .zip(&self.probs[1..])
            .map(|(&a, &p)| a * p)
            .sum()
    }

    /// Pooled value distribution with equal values merged, ascending by value.
    /// The all-dropped outcome contributes to value 0.
    pub fn value_masses(&self) -> Vec<(T, T)> {
        let mut pairs: Vec<(T, T)> = std::iter::once((T::zero(), self.probs[0]))
            .chain(self.acts.iter().copied().zip(self.probs[1..].iter().copied()))
            .collect();
        merge_equal_values(&mut pairs)
    }
}

pub(crate) fn merge_equal_values<T: Scalar>(pairs: &mut [(T, T)]) -> Vec<(T, T)> {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
    let mut out: Vec<(T, T)> = Vec::with_capacity(pairs.len());
    for &(v, m) in pairs.iter() {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = last.1 + m,
            _ => out.push((v, m)),
        }
    }
    out
}

/// Inverse-CDF draw over `(p_0, ..., p_n)`.
pub fn sample_pooled_activation<T: Scalar, R: Rng + ?Sized>(dist: &RegionDistribution<T>, rng: &mut R) -> PooledSample<T> {
    let u = T::lit(rng.random::<f64>());
    let mut cumulative = T::zero();
    let mut chosen = None;
    for (k, &p) in dist.probs.iter().enumerate() {
        cumulative = cumulative + p;
        if u < cumulative {
            chosen = Some(k);
            break;
        }
    }
    // rounding can leave the total a hair below 1; fall back to the last
    // outcome that has mass
    let k = chosen.unwrap_or_else(|| {
        dist.probs
            .iter()
            .rposition(|&p| p > T::zero())
            .expect("distribution has positive mass")
    });
    if k == 0 {
        PooledSample {
            value: T::zero(),
            source: None,
        }
    } else {
        PooledSample {
            value: dist.acts[k - 1],
            source: Some(dist.source[k - 1]),
        }
    }
}
