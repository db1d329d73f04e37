//! Closed-form counts of distinct sub-models, all in natural-log space.
//!
//! For `r` feature maps of `s` units pooled over non-overlapping regions of
//! `t` units there are `rs/t` regions. Max-pooling dropout gives each region
//! `t + 1` outcomes, stochastic pooling `t`, so the counts are
//! `(1+t)^(rs/t)` and `t^(rs/t)`. Convolutional dropout over `r` maps of side
//! `s` with `t x t` filters gives `2^(r t^2 (s-t+1)^2)` convolved-feature sets.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountFlavor {
    MaxPoolDropout,
    Stochastic,
    ConvDropout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountQuery {
    /// Feature maps.
    pub r: u64,
    /// Units per map for pooling flavors; map side length for conv dropout.
    pub s: u64,
    /// Units per pooling region for pooling flavors; filter side for conv dropout.
    pub t: u64,
    pub flavor: CountFlavor,
}

impl CountQuery {
    pub fn new(r: u64, s: u64, t: u64, flavor: CountFlavor) -> Self {
        Self { r, s, t, flavor }
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 || self.s == 0 || self.t == 0 {
            return Err(Error::invalid(format!(
                "counting extents must be positive, got r={} s={} t={}",
                self.r, self.s, self.t
            )));
        }
        match self.flavor {
            CountFlavor::ConvDropout if self.t > self.s => Err(Error::invalid(format!(
                "filter side {} exceeds map side {}",
                self.t, self.s
            ))),
            CountFlavor::MaxPoolDropout | CountFlavor::Stochastic if !(self.r * self.s).is_multiple_of(self.t) => {
                Err(Error::invalid(format!(
                    "rs = {} is not divisible by t = {}; the count assumes non-overlapping pooling regions that tile the maps",
                    self.r * self.s,
                    self.t
                )))
            }
            _ => Ok(()),
        }
    }

    /// Number of pooling regions `rs / t`.
    pub fn regions(&self) -> Result<u64> {
        self.validate()?;
        Ok(self.r * self.s / self.t)
    }
}

pub fn log_model_count(q: &CountQuery) -> Result<f64> {
    q.validate()?;
    let t = q.t as f64;
    Ok(match q.flavor {
        CountFlavor::MaxPoolDropout => q.regions()? as f64 * (1.0 + t).ln(),
        CountFlavor::Stochastic => q.regions()? as f64 * t.ln(),
        CountFlavor::ConvDropout => {
            let side = (q.s - q.t + 1) as f64;
            q.r as f64 * t * t * side * side * std::f64::consts::LN_2
        }
    })
}

/// Per-unit growth factor `b(t)` of the pooling model count.
pub fn base_b(t: u64, flavor: CountFlavor) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("pooling region size must be at least 1"));
    }
    let tf = t as f64;
    match flavor {
        CountFlavor::MaxPoolDropout => Ok(((1.0 + tf).ln() / tf).exp()),
        CountFlavor::Stochastic => Ok((tf.ln() / tf).exp()),
        CountFlavor::ConvDropout => Err(Error::invalid("b(t) is defined for pooling flavors only")),
    }
}

/// `ln(C_maxdrop / C_stochastic) = (rs/t) ln((1+t)/t)`.
pub fn log_count_ratio(maxdrop: &CountQuery, stochastic: &CountQuery) -> Result<f64> {
    if maxdrop.flavor != CountFlavor::MaxPoolDropout || stochastic.flavor != CountFlavor::Stochastic {
        return Err(Error::invalid("log_count_ratio expects a max-pooling dropout query and a stochastic query"));
    }
    if (maxdrop.r, maxdrop.s, maxdrop.t) != (stochastic.r, stochastic.s, stochastic.t) {
        return Err(Error::invalid(format!(
            "mismatched geometry: (r,s,t) = ({},{},{}) vs ({},{},{})",
            maxdrop.r, maxdrop.s, maxdrop.t, stochastic.r, stochastic.s, stochastic.t
        )));
    }
    let t = maxdrop.t as f64;
    Ok(maxdrop.regions()? as f64 * (1.0 / t).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts per-region choice combinations by walking every assignment.
    fn enumerate(regions: u64, choices: u64) -> u64 {
        fn rec(left: u64, choices: u64) -> u64 {
            if left == 0 {
                return 1;
            }
            (0..choices).map(|_| rec(left - 1, choices)).sum()
        }
        rec(regions, choices)
    }

    #[test]
    fn worked_counts() {
        let q = CountQuery::new(1, 4, 4, CountFlavor::MaxPoolDropout);
        assert!((log_model_count(&q).unwrap() - 5f64.ln()).abs() < 1e-15);
        let c = CountQuery::new(1, 3, 2, CountFlavor::ConvDropout);
        assert!((log_model_count(&c).unwrap() - 16.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let s = CountQuery::new(3, 5, 1, CountFlavor::Stochastic);
        assert_eq!(log_model_count(&s).unwrap(), 0.0);
    }

    #[test]
    fn counts_match_enumeration() {
        for (r, s, t) in [(1, 4, 4), (2, 4, 2), (1, 16, 4), (4, 4, 4), (2, 8, 4), (1, 9, 3), (3, 4, 2)] {
            let regions = r * s / t;
            let md = log_model_count(&CountQuery::new(r, s, t, CountFlavor::MaxPoolDropout)).unwrap();
            let st = log_model_count(&CountQuery::new(r, s, t, CountFlavor::Stochastic)).unwrap();
            assert_eq!(md.exp().round() as u64, enumerate(regions, t + 1));
            assert_eq!(st.exp().round() as u64, enumerate(regions, t));
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(log_model_count(&CountQuery::new(1, 5, 4, CountFlavor::MaxPoolDropout)).is_err());
        assert!(log_model_count(&CountQuery::new(0, 4, 4, CountFlavor::Stochastic)).is_err());
        assert!(log_model_count(&CountQuery::new(1, 2, 3, CountFlavor::ConvDropout)).is_err());
        let a = CountQuery::new(1, 4, 4, CountFlavor::MaxPoolDropout);
        let b = CountQuery::new(1, 8, 4, CountFlavor::Stochastic);
        assert!(log_count_ratio(&a, &b).is_err());
        assert!(log_count_ratio(&a, &a).is_err());
        assert!(base_b(0, CountFlavor::Stochastic).is_err());
    }

    #[test]
    fn bases() {
        assert!((base_b(4, CountFlavor::MaxPoolDropout).unwrap() - 5f64.powf(0.25)).abs() < 1e-12);
        assert!((base_b(4, CountFlavor::Stochastic).unwrap() - 4f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(base_b(1, CountFlavor::MaxPoolDropout).unwrap(), 2.0);
        assert_eq!(base_b(1, CountFlavor::Stochastic).unwrap(), 1.0);
        let mut prev_gap = f64::INFINITY;
        for t in 1..=64 {
            let md = base_b(t, CountFlavor::MaxPoolDropout).unwrap();
            let st = base_b(t, CountFlavor::Stochastic).unwrap();
            assert!(md > 1.0 && md <= 2.0);
            assert!(st >= 1.0 && st <= 3f64.powf(1.0 / 3.0) + 1e-15);
            assert!(md > st);
            assert!(md - st < prev_gap);
            prev_gap = md - st;
        }
        assert!(base_b(1 << 20, CountFlavor::MaxPoolDropout).unwrap() - 1.0 < 1e-4);
    }

    #[test]
    fn ratio() {
        let md = CountQuery::new(96, 1024, 4, CountFlavor::MaxPoolDropout);
        let st = CountQuery { flavor: CountFlavor::Stochastic, ..md };
        let r = log_count_ratio(&md, &st).unwrap();
        let expected = 24576.0 * 1.25f64.ln();
        assert!(((r - expected) / expected).abs() < 1e-9);
        assert!((r / std::f64::consts::LN_10 - 2381.6).abs() < 0.1);

        let one = CountQuery::new(3, 8, 1, CountFlavor::MaxPoolDropout);
        let r1 = log_count_ratio(&one, &CountQuery { flavor: CountFlavor::Stochastic, ..one }).unwrap();
        assert!((r1 - 24.0 * std::f64::consts::LN_2).abs() < 1e-12);

        let tiny = CountQuery::new(1, 4, 4, CountFlavor::MaxPoolDropout);
        let rt = log_count_ratio(&tiny, &CountQuery { flavor: CountFlavor::Stochastic, ..tiny }).unwrap();
        assert!((rt.exp() - enumerate(1, 5) as f64 / enumerate(1, 4) as f64).abs() < 1e-12);
    }

    #[test]
    fn huge_queries_stay_finite() {
        let q = CountQuery::new(1 << 20, 1 << 20, 4, CountFlavor::MaxPoolDropout);
        assert!(log_model_count(&q).unwrap().is_finite());
        let c = CountQuery::new(1 << 10, 1 << 12, 5, CountFlavor::ConvDropout);
        assert!(log_model_count(&c).unwrap().is_finite());
    }
}
