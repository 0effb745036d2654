//! Positive test sets: nested hierarchies, attack extensions, diagnostics.
//!
//! A hierarchy is a strictly ascending chain of positive sets, each a proper
//! subset of the next. Certifying all levels of one chain yields thresholds
//! that can only rise with set size and TNRs that can only fall, which makes
//! the cost of extra demonstrated reliability directly visible.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::threshold::LabeledScore;

/// Tag curators attach to adversarial samples.
pub const TAG_ATTACK: &str = "attack";

/// A test-set member: identity, ground truth, and the score under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: String,
    pub actual_age: f64,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub tags: BTreeSet<String>,
}

impl Sample {
    pub fn new(sample_id: impl Into<String>, actual_age: f64, estimate: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            actual_age,
            estimate,
            tags: BTreeSet::new(),
        }
    }

    pub fn tagged(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    /// Labels the sample against `legal_age`: strictly younger is positive,
    /// exactly at the legal age is negative.
    pub fn labeled(&self, legal_age: f64) -> LabeledScore {
        LabeledScore {
            sample_id: self.sample_id.clone(),
            actual_age: self.actual_age,
            is_positive: self.actual_age < legal_age,
            score: self.estimate,
        }
    }
}

/// A strictly ascending chain of positive test sets.
///
/// Levels are stored smallest first, each sorted by sample id. `seed` records
/// the RNG seed when the chain came out of [`build_hierarchy`]; chains
/// assembled without sampling carry `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestHierarchy {
    levels: Vec<Vec<Sample>>,
    seed: Option<u64>,
    legal_age: f64,
}

impl TestHierarchy {
    /// Validates and normalizes a chain: at least one level, unique ids per
    /// level, every sample under `legal_age`, and each level a proper subset
    /// of the next. Levels are re-sorted by sample id.
    pub fn from_levels(
        levels: Vec<Vec<Sample>>,
        seed: Option<u64>,
        legal_age: f64,
    ) -> Result<Self> {
        if levels.is_empty() || levels[0].is_empty() {
            return Err(Error::EmptyPositives);
        }
        let mut normalized = Vec::with_capacity(levels.len());
        for level in levels {
            normalized.push(normalize_level(level, legal_age)?);
        }
        for (index, pair) in normalized.windows(2).enumerate() {
            if pair[0].len() >= pair[1].len() || !is_id_subset(&pair[0], &pair[1]) {
                return Err(Error::NotNested { index });
            }
        }
        Ok(Self {
            levels: normalized,
            seed,
            legal_age,
        })
    }

    pub fn levels(&self) -> &[Vec<Sample>] {
        &self.levels
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn legal_age(&self) -> f64 {
        self.legal_age
    }

    /// Level `index` as labeled scores, ready for threshold setting.
    pub fn labeled_level(&self, index: usize) -> Vec<LabeledScore> {
        self.levels[index]
            .iter()
            .map(|s| s.labeled(self.legal_age))
            .collect()
    }
}

/// Sorts a level by sample id and rejects duplicates and over-age samples.
fn normalize_level(mut level: Vec<Sample>, legal_age: f64) -> Result<Vec<Sample>> {
    level.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    for pair in level.windows(2) {
        if pair[0].sample_id == pair[1].sample_id {
            return Err(Error::DuplicateSampleId {
                sample_id: pair[0].sample_id.clone(),
            });
        }
    }
    for sample in &level {
        if sample.actual_age.is_nan() || sample.actual_age >= legal_age {
            return Err(Error::NotUnderLegalAge {
                sample_id: sample.sample_id.clone(),
                actual_age: sample.actual_age,
                legal_age,
            });
        }
    }
    Ok(level)
}

/// Both slices sorted by id: is every id of `small` present in `big`?
fn is_id_subset(small: &[Sample], big: &[Sample]) -> bool {
    let mut big_iter = big.iter();
    'outer: for needle in small {
        for candidate in big_iter.by_ref() {
            match candidate.sample_id.cmp(&needle.sample_id) {
                std::cmp::Ordering::Less => continue,
                std::cmp::Ordering::Equal => continue 'outer,
                std::cmp::Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

/// Samples a nested chain of the given sizes from a positive pool.
///
/// The pool is first normalized (sorted by sample id, duplicates rejected) so
/// that input order never leaks into the draw. The largest level is sampled
/// from the pool, then each smaller level from the one above it, which is
/// what forces the subset chain. The same seed over the same pool and sizes
/// reproduces the chain exactly.
pub fn build_hierarchy(
    positives: &[Sample],
    sizes: &[usize],
    seed: u64,
    legal_age: f64,
) -> Result<TestHierarchy> {
    if sizes.is_empty() {
        return Err(Error::EmptySizes);
    }
    if sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::SizesNotAscending {
            sizes: sizes.to_vec(),
        });
    }
    let pool = normalize_level(positives.to_vec(), legal_age)?;
    if pool.is_empty() {
        return Err(Error::EmptyPositives);
    }
    let largest = *sizes.last().expect("sizes is non-empty");
    if largest > pool.len() {
        return Err(Error::SizeExceedsPool {
            size: largest,
            pool: pool.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels_desc: Vec<Vec<Sample>> = Vec::with_capacity(sizes.len());
    let mut current = subsample(&pool, largest, &mut rng);
    for &size in sizes.iter().rev().skip(1) {
        let next = subsample(&current, size, &mut rng);
        levels_desc.push(std::mem::replace(&mut current, next));
    }
    levels_desc.push(current);
    levels_desc.reverse();

    TestHierarchy::from_levels(levels_desc, Some(seed), legal_age)
}

/// Draws `amount` samples from `from`, preserving the sorted-by-id order.
fn subsample(from: &[Sample], amount: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    if amount == from.len() {
        return from.to_vec();
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, from.len(), amount).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| from[i].clone()).collect()
}

/// Two-level hierarchy: the regular set, then regular plus attack samples.
///
/// Attack samples must be disjoint from the regular set by id, must all
/// carry the `attack` tag, and must be positives like everything else. No
/// sampling happens here, so the result carries no seed.
pub fn extend_with_attacks(
    regular: &[Sample],
    attacks: &[Sample],
    legal_age: f64,
) -> Result<TestHierarchy> {
    if regular.is_empty() {
        return Err(Error::EmptyPositives);
    }
    if attacks.is_empty() {
        return Err(Error::EmptyAttacks);
    }
    let regular = normalize_level(regular.to_vec(), legal_age)?;
    let attacks = normalize_level(attacks.to_vec(), legal_age)?;
    for attack in &attacks {
        if !attack.tags.contains(TAG_ATTACK) {
            return Err(Error::MissingAttackTag {
                sample_id: attack.sample_id.clone(),
            });
        }
    }
    let regular_ids: BTreeSet<&str> = regular.iter().map(|s| s.sample_id.as_str()).collect();
    for attack in &attacks {
        if regular_ids.contains(attack.sample_id.as_str()) {
            return Err(Error::IdCollision {
                sample_id: attack.sample_id.clone(),
            });
        }
    }
    let mut extended = regular.clone();
    extended.extend(attacks);
    TestHierarchy::from_levels(vec![regular, extended], None, legal_age)
}

/// Diagnostic categories attached to individual samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    /// Estimate and recorded age disagree enough to suspect a label error.
    ClericalSuspect,
    /// Positive whose estimate lands above a hysteresis age.
    HardExample,
    /// Curator-tagged adversarial sample.
    AttackSuspect,
}

impl std::fmt::Display for FlagKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::ClericalSuspect => "clerical_suspect",
            Self::HardExample => "hard_example",
            Self::AttackSuspect => "attack_suspect",
        };
        f.write_str(s)
    }
}

/// One flagged sample. `severity_score` orders flags of the same kind;
/// larger means more worth a curator's attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticFlag {
    pub sample_id: String,
    pub kind: FlagKind,
    pub detail: String,
    pub severity_score: f64,
}

fn sort_flags(flags: &mut [DiagnosticFlag]) {
    flags.sort_by(|a, b| {
        b.severity_score
            .total_cmp(&a.severity_score)
            .then_with(|| a.sample_id.cmp(&b.sample_id))
    });
}

/// Flags samples whose estimate sits at least `gap_years` from the recorded
/// age, in either direction. Severity is the absolute gap; output is sorted
/// by severity descending, ties by sample id.
pub fn flag_clerical_suspects(
    samples: &[Sample],
    gap_years: f64,
) -> Result<Vec<DiagnosticFlag>> {
    if !gap_years.is_finite() || gap_years <= 0.0 {
        return Err(Error::NonPositiveGap(gap_years));
    }
    let mut flags: Vec<DiagnosticFlag> = samples
        .iter()
        .filter_map(|s| {
            let gap = (s.estimate - s.actual_age).abs();
            (gap >= gap_years).then(|| DiagnosticFlag {
                sample_id: s.sample_id.clone(),
                kind: FlagKind::ClericalSuspect,
                detail: format!(
                    "estimate {} vs recorded age {} (gap {gap})",
                    s.estimate, s.actual_age
                ),
                severity_score: gap,
            })
        })
        .collect();
    sort_flags(&mut flags);
    Ok(flags)
}

/// Flags positives estimated above `hysteresis_age`: the samples that alone
/// force the operating threshold above that age. Severity is the excess over
/// the hysteresis age; output is sorted by severity descending.
pub fn hard_examples(positives: &[Sample], hysteresis_age: f64) -> Vec<DiagnosticFlag> {
    let mut flags: Vec<DiagnosticFlag> = positives
        .iter()
        .filter(|s| s.estimate > hysteresis_age)
        .map(|s| DiagnosticFlag {
            sample_id: s.sample_id.clone(),
            kind: FlagKind::HardExample,
            detail: format!(
                "estimated {} at actual age {}, above hysteresis age {hysteresis_age}",
                s.estimate, s.actual_age
            ),
            severity_score: s.estimate - hysteresis_age,
        })
        .collect();
    sort_flags(&mut flags);
    flags
}

/// Surfaces curator-tagged attack samples as flags. Severity is the amount
/// the estimate overshoots the recorded age, floored at zero.
pub fn attack_tagged(samples: &[Sample]) -> Vec<DiagnosticFlag> {
    let mut flags: Vec<DiagnosticFlag> = samples
        .iter()
        .filter(|s| s.tags.contains(TAG_ATTACK))
        .map(|s| DiagnosticFlag {
            sample_id: s.sample_id.clone(),
            kind: FlagKind::AttackSuspect,
            detail: format!(
                "curator-tagged attack sample (estimate {}, actual age {})",
                s.estimate, s.actual_age
            ),
            severity_score: (s.estimate - s.actual_age).max(0.0),
        })
        .collect();
    sort_flags(&mut flags);
    flags
}

/// Groups a hierarchy's levels by id count, useful for summaries.
pub fn level_sizes(hierarchy: &TestHierarchy) -> Vec<usize> {
    hierarchy.levels().iter().map(Vec::len).collect()
}

/// Index of each sample id in the smallest level that contains it.
pub fn first_level_of(hierarchy: &TestHierarchy) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (index, level) in hierarchy.levels().iter().enumerate() {
        for sample in level {
            out.entry(sample.sample_id.clone()).or_insert(index);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample::new(format!("s{i:04}"), 12.0 + (i % 6) as f64, 14.0 + i as f64 * 0.01))
            .collect()
    }

    #[test]
    fn labeling_respects_the_legal_boundary() {
        assert!(Sample::new("a", 17.9, 20.0).labeled(18.0).is_positive);
        assert!(!Sample::new("b", 18.0, 20.0).labeled(18.0).is_positive);
    }

    #[test]
    fn builds_requested_sizes_in_a_chain() {
        let h = build_hierarchy(&pool(100), &[10, 30, 60], 7, 18.0).unwrap();
        assert_eq!(level_sizes(&h), vec![10, 30, 60]);
        assert_eq!(h.seed(), Some(7));
        for pair in h.levels().windows(2) {
            assert!(is_id_subset(&pair[0], &pair[1]));
        }
    }

    #[test]
    fn same_seed_reproduces_the_chain() {
        let a = build_hierarchy(&pool(80), &[5, 40], 42, 18.0).unwrap();
        let b = build_hierarchy(&pool(80), &[5, 40], 42, 18.0).unwrap();
        assert_eq!(a, b);
        let c = build_hierarchy(&pool(80), &[5, 40], 43, 18.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn input_order_does_not_change_the_draw() {
        let mut shuffled = pool(50);
        shuffled.reverse();
        let a = build_hierarchy(&pool(50), &[8, 20], 3, 18.0).unwrap();
        let b = build_hierarchy(&shuffled, &[8, 20], 3, 18.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_pool_level_is_the_whole_pool() {
        let h = build_hierarchy(&pool(30), &[10, 30], 0, 18.0).unwrap();
        assert_eq!(h.levels()[1], normalize_level(pool(30), 18.0).unwrap());
    }

    #[test]
    fn rejects_bad_sizes_and_pools() {
        let p = pool(20);
        assert!(matches!(
            build_hierarchy(&p, &[], 0, 18.0),
            Err(Error::EmptySizes)
        ));
        assert!(matches!(
            build_hierarchy(&p, &[10, 10], 0, 18.0),
            Err(Error::SizesNotAscending { .. })
        ));
        assert!(matches!(
            build_hierarchy(&p, &[30], 0, 18.0),
            Err(Error::SizeExceedsPool { size: 30, pool: 20 })
        ));
        let mut with_adult = pool(5);
        with_adult.push(Sample::new("adult", 19.0, 21.0));
        assert!(matches!(
            build_hierarchy(&with_adult, &[2], 0, 18.0),
            Err(Error::NotUnderLegalAge { .. })
        ));
    }

    #[test]
    fn from_levels_rejects_non_chains() {
        let a = Sample::new("a", 15.0, 16.0);
        let b = Sample::new("b", 14.0, 15.0);
        let c = Sample::new("c", 13.0, 14.0);
        // Same size.
        let err = TestHierarchy::from_levels(
            vec![vec![a.clone()], vec![b.clone()]],
            None,
            18.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotNested { index: 0 }));
        // Bigger but not a superset.
        let err = TestHierarchy::from_levels(
            vec![vec![a.clone()], vec![b.clone(), c.clone()]],
            None,
            18.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotNested { index: 0 }));
        // Proper chain passes.
        assert!(TestHierarchy::from_levels(vec![vec![a.clone()], vec![a, b]], None, 18.0).is_ok());
    }

    #[test]
    fn attack_extension_builds_two_levels() {
        let regular = vec![
            Sample::new("r1", 15.0, 16.0),
            Sample::new("r2", 16.0, 17.5),
        ];
        let attacks = vec![Sample::new("a1", 16.0, 24.0).tagged(TAG_ATTACK)];
        let h = extend_with_attacks(&regular, &attacks, 18.0).unwrap();
        assert_eq!(level_sizes(&h), vec![2, 3]);
        assert_eq!(h.seed(), None);
        assert!(h.levels()[1].iter().any(|s| s.sample_id == "a1"));
    }

    #[test]
    fn attack_extension_rejects_bad_input() {
        let regular = vec![Sample::new("r1", 15.0, 16.0)];
        assert!(matches!(
            extend_with_attacks(&regular, &[], 18.0),
            Err(Error::EmptyAttacks)
        ));
        let untagged = vec![Sample::new("a1", 16.0, 24.0)];
        assert!(matches!(
            extend_with_attacks(&regular, &untagged, 18.0),
            Err(Error::MissingAttackTag { .. })
        ));
        let colliding = vec![Sample::new("r1", 16.0, 24.0).tagged(TAG_ATTACK)];
        assert!(matches!(
            extend_with_attacks(&regular, &colliding, 18.0),
            Err(Error::IdCollision { .. })
        ));
    }

    #[test]
    fn clerical_suspects_use_absolute_gap() {
        let samples = vec![
            Sample::new("over", 6.0, 42.81),
            Sample::new("under", 40.0, 15.0),
            Sample::new("fine", 20.0, 22.0),
        ];
        let flags = flag_clerical_suspects(&samples, 20.0).unwrap();
        let ids: Vec<&str> = flags.iter().map(|f| f.sample_id.as_str()).collect();
        assert_eq!(ids, vec!["over", "under"]);
        assert!((flags[0].severity_score - 36.81).abs() < 1e-12);
        assert!(matches!(
            flag_clerical_suspects(&samples, 0.0),
            Err(Error::NonPositiveGap(_))
        ));
    }

    #[test]
    fn hard_examples_sit_strictly_above_the_age() {
        let samples = vec![
            Sample::new("at", 17.0, 25.0),
            Sample::new("above", 17.0, 25.4),
            Sample::new("way-above", 16.0, 28.0),
        ];
        let flags = hard_examples(&samples, 25.0);
        let ids: Vec<&str> = flags.iter().map(|f| f.sample_id.as_str()).collect();
        assert_eq!(ids, vec!["way-above", "above"]);
    }

    #[test]
    fn attack_tags_surface_as_flags() {
        let samples = vec![
            Sample::new("plain", 15.0, 16.0),
            Sample::new("made-up", 16.0, 27.0).tagged(TAG_ATTACK),
        ];
        let flags = attack_tagged(&samples);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].sample_id, "made-up");
        assert_eq!(flags[0].kind, FlagKind::AttackSuspect);
        assert!((flags[0].severity_score - 11.0).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Whatever sizes we ask for, the result is a valid chain whose
            // union order statistics come from the original pool.
            #[test]
            fn hierarchy_levels_chain(
                pool_size in 3usize..120,
                seed in 0u64..1000,
            ) {
                let p = pool(pool_size);
                let sizes = [1, pool_size / 2 + 1, pool_size];
                prop_assume!(sizes[1] > sizes[0] && sizes[2] > sizes[1]);
                let h = build_hierarchy(&p, &sizes, seed, 18.0).unwrap();
                prop_assert_eq!(level_sizes(&h), sizes.to_vec());
                for pair in h.levels().windows(2) {
                    prop_assert!(is_id_subset(&pair[0], &pair[1]));
                }
            }

            // first_level_of is consistent with membership.
            #[test]
            fn first_level_index_is_correct(pool_size in 4usize..60, seed in 0u64..200) {
                let p = pool(pool_size);
                let sizes = [2, pool_size];
                let h = build_hierarchy(&p, &sizes, seed, 18.0).unwrap();
                for (id, level) in first_level_of(&h) {
                    prop_assert!(h.levels()[level].iter().any(|s| s.sample_id == id));
                    if level > 0 {
                        prop_assert!(!h.levels()[level - 1].iter().any(|s| s.sample_id == id));
                    }
                }
            }
        }
    }
}
