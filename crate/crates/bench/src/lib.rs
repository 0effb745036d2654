//! Benchmark helpers: canned inputs shared by the criterion benches.

use zerofail::synth::SyntheticDesign;
use zerofail::testsets::Sample;
use zerofail::threshold::LabeledScore;

/// A deterministic positive pool of the given size.
pub fn positive_pool(size: usize) -> Vec<Sample> {
    let design = SyntheticDesign {
        per_year_positive: size.div_ceil(6) as u32,
        per_year_negative: 1,
        seed: 97,
        ..SyntheticDesign::default()
    };
    let mut samples = zerofail::synth::generate(&design).expect("valid design");
    samples.retain(|s| s.actual_age < design.legal_age());
    samples.truncate(size);
    samples
}

/// A deterministic negative set of the given size.
pub fn negative_set(size: usize) -> Vec<LabeledScore> {
    let design = SyntheticDesign {
        per_year_positive: 1,
        per_year_negative: size.div_ceil(33) as u32,
        seed: 53,
        ..SyntheticDesign::default()
    };
    let samples = zerofail::synth::generate(&design).expect("valid design");
    let (_, mut negatives) =
        zerofail::ingest::split_by_legal_age(&samples, design.legal_age());
    negatives.truncate(size);
    negatives
}
