//! Synthetic datasets and Monte Carlo checks.
//!
//! Generated estimates are the true age plus Gaussian noise, uncapped in
//! both directions. Every age cohort draws from its own RNG stream (stream
//! id = age in years) of one seeded ChaCha generator, so resizing one cohort
//! never shifts the draws of another and runs are reproducible across
//! platforms from the seed alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest;
use crate::reliability::{check_probability, required_sample_size, ReliabilityTarget};
use crate::testsets::Sample;
use crate::threshold::{
    normalized_hysteresis, tnr_at, zero_failure_threshold, OperatingPoint, TnrReport,
};

/// Inclusive range of whole-year ages, e.g. `12..17`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub min: u32,
    pub max: u32,
}

impl YearRange {
    pub fn new(min: u32, max: u32) -> Result<Self> {
        if min > max {
            return Err(Error::EmptyAgeRange { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn years(&self) -> std::ops::RangeInclusive<u32> {
        self.min..=self.max
    }

    pub fn count(&self) -> u32 {
        self.max - self.min + 1
    }
}

impl std::fmt::Display for YearRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

impl std::str::FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (min, max) = s
            .split_once("..")
            .ok_or_else(|| format!("expected `min..max`, got `{s}`"))?;
        let min: u32 = min.parse().map_err(|_| format!("bad year `{min}`"))?;
        let max: u32 = max.parse().map_err(|_| format!("bad year `{max}`"))?;
        Self::new(min, max).map_err(|e| e.to_string())
    }
}

/// Full recipe for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesign {
    pub positive_years: YearRange,
    pub negative_years: YearRange,
    pub per_year_positive: u32,
    pub per_year_negative: u32,
    pub noise_sigma: f64,
    pub noise_mean: f64,
    pub seed: u64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self {
            positive_years: YearRange { min: 12, max: 17 },
            negative_years: YearRange { min: 18, max: 50 },
            per_year_positive: 10,
            per_year_negative: 100,
            noise_sigma: 3.0,
            noise_mean: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticDesign {
    pub fn validate(&self) -> Result<()> {
        if self.positive_years.max >= self.negative_years.min {
            return Err(Error::AgeRangesOverlap {
                positive: self.positive_years.to_string(),
                negative: self.negative_years.to_string(),
            });
        }
        if self.per_year_positive == 0 || self.per_year_negative == 0 {
            return Err(Error::ZeroPerYearCount);
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma <= 0.0 {
            return Err(Error::InvalidNoiseSigma(self.noise_sigma));
        }
        if !self.noise_mean.is_finite() {
            return Err(Error::InvalidNoiseMean(self.noise_mean));
        }
        Ok(())
    }

    /// Legal age implied by the design: the youngest negative year.
    pub fn legal_age(&self) -> f64 {
        self.negative_years.min as f64
    }

    pub fn positive_count(&self) -> usize {
        self.positive_years.count() as usize * self.per_year_positive as usize
    }

    pub fn negative_count(&self) -> usize {
        self.negative_years.count() as usize * self.per_year_negative as usize
    }
}

/// Generates the dataset a design describes, positives first, cohorts in
/// ascending age order, ids `y<age>-<index>`.
pub fn generate(design: &SyntheticDesign) -> Result<Vec<Sample>> {
    design.validate()?;
    let noise = Normal::new(design.noise_mean, design.noise_sigma)
        .expect("sigma validated positive and finite");
    let mut samples =
        Vec::with_capacity(design.positive_count() + design.negative_count());
    for age in design.positive_years.years() {
        emit_cohort(&mut samples, age, design.per_year_positive, design.seed, &noise);
    }
    for age in design.negative_years.years() {
        emit_cohort(&mut samples, age, design.per_year_negative, design.seed, &noise);
    }
    Ok(samples)
}

fn emit_cohort(
    out: &mut Vec<Sample>,
    age: u32,
    count: u32,
    seed: u64,
    noise: &Normal<f64>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(age as u64);
    for index in 0..count {
        let estimate = age as f64 + noise.sample(&mut rng);
        out.push(Sample::new(
            format!("y{age:02}-{index:06}"),
            age as f64,
            estimate,
        ));
    }
}

/// Outcome of a Monte Carlo check of the zero-failure guarantee.
///
/// `bound` is the analytic probability `(1 - p)^n` that `n` independent
/// trials with per-trial failure probability `p` all pass; the empirical
/// rate should match it to within sampling noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: u64,
    pub pass_count: u64,
    pub empirical_pass_rate: f64,
    pub bound: f64,
    pub seed: u64,
}

/// Runs `trials` simulated test campaigns of `n` samples each.
///
/// A campaign passes when none of its samples fails; per-sample failures are
/// Bernoulli with probability `failure_probability`. Each trial uses its own
/// RNG stream, so the result does not depend on how campaigns short-circuit.
pub fn monte_carlo_pass_rate(
    failure_probability: f64,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloSummary> {
    check_probability("failure_probability", failure_probability)?;
    if n == 0 {
        return Err(Error::ZeroSampleCount);
    }
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let mut pass_count = 0u64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let mut passed = true;
        for _ in 0..n {
            if rng.random::<f64>() < failure_probability {
                passed = false;
                break;
            }
        }
        if passed {
            pass_count += 1;
        }
    }
    Ok(MonteCarloSummary {
        trials,
        pass_count,
        empirical_pass_rate: pass_count as f64 / trials as f64,
        bound: (1.0 - failure_probability).powf(n as f64),
        seed,
    })
}

/// One fully-certified synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub design: SyntheticDesign,
    pub positive_count: usize,
    pub negative_count: usize,
    pub operating_point: OperatingPoint,
    pub tnr_reports: Vec<TnrReport>,
    pub dataset_fingerprint: String,
}

/// Generates and certifies each design at the given hysteresis ages.
///
/// Per row: generate the dataset, split it at the design's legal age, set
/// the zero-failure threshold on the positives, and report TNR at every
/// hysteresis age (sorted ascending).
pub fn run_table1_experiment(
    designs: &[SyntheticDesign],
    hysteresis_ages: &[f64],
) -> Result<Vec<ExperimentRow>> {
    let ages = normalized_hysteresis(hysteresis_ages);
    let mut rows = Vec::with_capacity(designs.len());
    for design in designs {
        let samples = generate(design)?;
        let dataset_fingerprint = ingest::dataset_fingerprint(&samples);
        let (positives, negatives) = ingest::split_by_legal_age(&samples, design.legal_age());
        let operating_point = zero_failure_threshold(&positives)?;
        let tnr_reports = ages
            .iter()
            .map(|&age| tnr_at(&negatives, &operating_point, age))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ExperimentRow {
            design: design.clone(),
            positive_count: positives.len(),
            negative_count: negatives.len(),
            operating_point,
            tnr_reports,
            dataset_fingerprint,
        });
    }
    Ok(rows)
}

/// The three standard planning targets: 95% confidence of 95%, 99.5%, and
/// 99.8% reliability.
pub fn standard_targets() -> [ReliabilityTarget; 3] {
    [
        ReliabilityTarget {
            confidence: 0.95,
            reliability: 0.95,
        },
        ReliabilityTarget {
            confidence: 0.95,
            reliability: 0.995,
        },
        ReliabilityTarget {
            confidence: 0.95,
            reliability: 0.998,
        },
    ]
}

/// Sizes a template design so its positive set meets `target`.
///
/// The per-year positive count is the required ceiling size divided by the
/// number of positive years, rounded up, so the whole positive set is at
/// least the required size while cohorts stay balanced.
pub fn design_for_target(
    template: &SyntheticDesign,
    target: &ReliabilityTarget,
    seed: u64,
) -> Result<SyntheticDesign> {
    let required = required_sample_size(target)?;
    let years = template.positive_years.count() as u64;
    let per_year = required.ceiling.div_ceil(years);
    let mut design = template.clone();
    design.per_year_positive = u32::try_from(per_year).expect("per-year count fits in u32");
    design.seed = seed;
    design.validate()?;
    Ok(design)
}

/// The three standard designs sized for [`standard_targets`], seeded
/// `seed`, `seed + 1`, `seed + 2`.
pub fn standard_designs(
    template: &SyntheticDesign,
    seed: u64,
) -> Result<Vec<(ReliabilityTarget, SyntheticDesign)>> {
    standard_targets()
        .iter()
        .enumerate()
        .map(|(i, target)| {
            let design = design_for_target(template, target, seed.wrapping_add(i as u64))?;
            Ok((*target, design))
        })
        .collect()
}
