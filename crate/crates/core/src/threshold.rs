//! Operating points and true-negative rates.
//!
//! Scores are age estimates: higher means older. The alarm rule used
//! everywhere in this crate is `score <= threshold`, so a sample scoring
//! exactly at the threshold raises an alarm. Setting the threshold to the
//! largest score in a positive test set therefore alarms on every positive
//! sample in the set, which is what makes the zero-failure guarantee hold by
//! construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scored sample with its ground-truth label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub sample_id: String,
    pub actual_age: f64,
    /// True when the sample is under the legal age, i.e. must alarm.
    pub is_positive: bool,
    pub score: f64,
}

impl LabeledScore {
    pub fn positive(sample_id: impl Into<String>, actual_age: f64, score: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            actual_age,
            is_positive: true,
            score,
        }
    }

    pub fn negative(sample_id: impl Into<String>, actual_age: f64, score: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            actual_age,
            is_positive: false,
            score,
        }
    }
}

/// A threshold together with the sample that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// Number of positive test samples allowed to score above the threshold.
    pub k_allowed_failures: usize,
    /// Sample whose score equals the threshold; smallest id on ties.
    pub source_sample_id: String,
}

/// True-negative rate of one negative set at one hysteresis age.
///
/// Only negatives with `actual_age >= hysteresis_age` are eligible; a
/// negative counts as a true negative when its score lies strictly above the
/// threshold. With no eligible samples the rate is reported as 0 and
/// [`TnrReport::is_defined`] returns false; callers render that case as
/// not-available rather than as a zero rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnrReport {
    pub hysteresis_age: f64,
    pub eligible_count: usize,
    pub true_negative_count: usize,
    pub tnr: f64,
}

impl TnrReport {
    pub fn is_defined(&self) -> bool {
        self.eligible_count > 0
    }
}

/// Operating point that alarms on every sample of the positive set.
///
/// The threshold is the largest positive score. Errors on an empty set, on a
/// sample labeled negative, and on non-finite scores.
pub fn zero_failure_threshold(positives: &[LabeledScore]) -> Result<OperatingPoint> {
    k_failure_threshold(positives, 0)
}

/// Operating point allowing up to `k` positive samples to stay silent.
///
/// The threshold is the `(k + 1)`-th largest positive score, so at most `k`
/// samples of the set score strictly above it. When that order statistic is
/// tied with higher-ranked scores, fewer than `k` samples actually fail; the
/// bound is never exceeded. Requires `k < positives.len()`.
pub fn k_failure_threshold(positives: &[LabeledScore], k: usize) -> Result<OperatingPoint> {
    if positives.is_empty() {
        return Err(Error::EmptyPositives);
    }
    if k >= positives.len() {
        return Err(Error::TooManyFailures {
            k,
            available: positives.len(),
        });
    }
    for sample in positives {
        if !sample.is_positive {
            return Err(Error::NegativeInPositives {
                sample_id: sample.sample_id.clone(),
            });
        }
        if !sample.score.is_finite() {
            return Err(Error::NonFiniteScore {
                sample_id: sample.sample_id.clone(),
            });
        }
    }

    let mut ranked: Vec<&LabeledScore> = positives.iter().collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.sample_id.cmp(&b.sample_id))
    });
    let threshold = ranked[k].score;
    let source_sample_id = ranked
        .iter()
        .filter(|s| s.score == threshold)
        .map(|s| s.sample_id.as_str())
        .min()
        .expect("threshold score came from this list")
        .to_string();

    Ok(OperatingPoint {
        threshold,
        k_allowed_failures: k,
        source_sample_id,
    })
}

/// TNR of `negatives` at `hysteresis_age` under `operating_point`.
///
/// Errors on a sample labeled positive and on non-finite scores or ages.
pub fn tnr_at(
    negatives: &[LabeledScore],
    operating_point: &OperatingPoint,
    hysteresis_age: f64,
) -> Result<TnrReport> {
    let mut eligible_count = 0usize;
    let mut true_negative_count = 0usize;
    for sample in negatives {
        if sample.is_positive {
            return Err(Error::PositiveInNegatives {
                sample_id: sample.sample_id.clone(),
            });
        }
        if !sample.score.is_finite() || !sample.actual_age.is_finite() {
            return Err(Error::NonFiniteScore {
                sample_id: sample.sample_id.clone(),
            });
        }
        if sample.actual_age >= hysteresis_age {
            eligible_count += 1;
            if sample.score > operating_point.threshold {
                true_negative_count += 1;
            }
        }
    }
    let tnr = if eligible_count > 0 {
        true_negative_count as f64 / eligible_count as f64
    } else {
        0.0
    };
    Ok(TnrReport {
        hysteresis_age,
        eligible_count,
        true_negative_count,
        tnr,
    })
}

/// Hysteresis ages sorted ascending with exact duplicates removed.
pub(crate) fn normalized_hysteresis(ages: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = ages.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| a == b);
    out
}
