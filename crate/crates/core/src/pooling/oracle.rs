//! Brute-force reference for max-pooling dropout over one region.
//!
//! Walks all `2^n` Bernoulli masks, weights each by `p^kept * q^dropped`,
//! and records the mass landing on each max-over-retained value. It shares
//! no code with the closed-form distribution it is used to check.

use crate::error::{Error, Result};

pub const MAX_ENUMERATION_UNITS: usize = 20;

/// Exact pooled-value distribution, ascending by value, equal values merged.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueDistribution {
    pub outcomes: Vec<(f64, f64)>,
}

impl ValueDistribution {
    pub fn mass_of(&self, value: f64) -> f64 {
        self.outcomes
            .iter()
            .filter(|(v, _)| *v == value)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn expectation(&self) -> f64 {
        self.outcomes.iter().map(|(v, m)| v * m).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.outcomes.iter().map(|(_, m)| m).sum()
    }
}

pub fn enumerate_mask_distribution(acts: &[f64], retain_p: f64) -> Result<ValueDistribution> {
    let n = acts.len();
    if n == 0 {
        return Err(Error::invalid("pooling region must contain at least one unit"));
    }
    if n > MAX_ENUMERATION_UNITS {
        return Err(Error::invalid(format!(
            "mask enumeration limited to {MAX_ENUMERATION_UNITS} units, got {n}"
        )));
    }
    if !(retain_p > 0.0 && retain_p <= 1.0) {
        return Err(Error::invalid(format!("retain probability must lie in (0, 1], got {retain_p}")));
    }
    let q = 1.0 - retain_p;
    let mut outcomes: Vec<(f64, f64)> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let kept = mask.count_ones() as i32;
        let weight = retain_p.powi(kept) * q.powi(n as i32 - kept);
        if weight == 0.0 {
            continue;
        }
        let mut pooled = 0.0;
        let mut any = false;
        for (i, &a) in acts.iter().enumerate() {
            if mask & (1 << i) != 0 && (!any || a > pooled) {
                pooled = a;
                any = true;
            }
        }
        match outcomes.iter_mut().find(|(v, _)| *v == pooled) {
            Some(entry) => entry.1 += weight,
            None => outcomes.push((pooled, weight)),
        }
    }
    outcomes.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite activations"));
    Ok(ValueDistribution { outcomes })
}
