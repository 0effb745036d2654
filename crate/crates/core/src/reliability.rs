//! Binomial test-size planning.
//!
//! A zero-failure test run of `n` independent positive samples, all passed,
//! demonstrates reliability `r` with confidence `1 - r^n`. The functions here
//! move between the three quantities: sample count, reliability, confidence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A reliability claim paired with the confidence demanded of it.
///
/// `reliability` is the per-trial success probability to be demonstrated and
/// `confidence` the lower bound on the probability that a clean run actually
/// establishes it. Both live strictly inside (0, 1): the endpoints would ask
/// for a trivial or an infinite test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTarget {
    pub confidence: f64,
    pub reliability: f64,
}

impl ReliabilityTarget {
    pub fn new(confidence: f64, reliability: f64) -> Result<Self> {
        let target = Self {
            confidence,
            reliability,
        };
        target.validate()?;
        Ok(target)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("confidence", self.confidence)?;
        check_probability("reliability", self.reliability)
    }
}

/// Exact and rounded-up sample counts for a target.
///
/// `exact` is the real-valued solution of `1 - r^n = c`; `ceiling` is the
/// smallest integer test size that meets or exceeds the target. Reports quote
/// both so the rounding step stays visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequiredSampleSize {
    pub exact: f64,
    pub ceiling: u64,
}

/// Smallest zero-failure test size demonstrating `target`.
pub fn required_sample_size(target: &ReliabilityTarget) -> Result<RequiredSampleSize> {
    target.validate()?;
    let exact = (1.0 - target.confidence).ln() / target.reliability.ln();
    Ok(RequiredSampleSize {
        exact,
        ceiling: exact.ceil() as u64,
    })
}

/// Confidence established by `n` passed samples at the given reliability.
pub fn achieved_confidence(n: u64, reliability: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroSampleCount);
    }
    check_probability("reliability", reliability)?;
    Ok(1.0 - reliability.powf(n as f64))
}

/// Reliability demonstrated by `n` passed samples at the given confidence.
pub fn demonstrated_reliability(n: u64, confidence: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroSampleCount);
    }
    check_probability("confidence", confidence)?;
    Ok((1.0 - confidence).powf(1.0 / n as f64))
}

/// Rejects values outside the open interval (0, 1). NaN fails both bounds.
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { name, value })
    }
}
