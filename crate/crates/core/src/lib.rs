//! Zero-failure certification of score-based binary classifiers.
//!
//! The crate answers three questions about a classifier that must never miss
//! a positive, using age verification as the running domain (positives are
//! under-age subjects, scores are age estimates, higher means older):
//!
//! - How many positive samples must a test set hold so that a run with zero
//!   failures demonstrates a reliability target at a confidence level?
//!   ([`reliability`])
//! - Where does the operating threshold go so that every positive in the
//!   test set alarms, and what does that cost in true-negative rate at the
//!   ages where false alarms matter? ([`threshold`])
//! - How do thresholds and TNRs move as the test set grows along a nested
//!   hierarchy, gains adversarial samples, or gets curated? ([`testsets`])
//!
//! [`ingest`] reads prediction logs and rater files, [`synth`] generates
//! reproducible synthetic datasets and Monte Carlo checks, and [`report`]
//! packages everything into JSON, Markdown, or CSV reports.
//!
//! ```
//! use zerofail::{reliability, report, threshold};
//!
//! // A test set of 59 passed samples demonstrates 95% reliability with
//! // 95% confidence.
//! let target = reliability::ReliabilityTarget::new(0.95, 0.95)?;
//! let size = reliability::required_sample_size(&target)?;
//! assert_eq!(size.ceiling, 59);
//!
//! // The operating threshold is the largest positive score: every positive
//! // in the set alarms, by construction.
//! let positives = vec![
//!     threshold::LabeledScore::positive("a", 15.0, 16.2),
//!     threshold::LabeledScore::positive("b", 16.0, 19.7),
//! ];
//! let op = threshold::zero_failure_threshold(&positives)?;
//! assert_eq!(op.threshold, 19.7);
//! # Ok::<(), zerofail::Error>(())
//! ```

pub mod error;
pub mod ingest;
pub mod reliability;
pub mod report;
pub mod synth;
pub mod testsets;
pub mod threshold;

pub use error::{Error, ParseFailure, Result, RowError, RowErrorKind};
pub use ingest::{AggregationPolicy, ParseMode, ParseOutcome, RaterOutcome, RaterRow};
pub use reliability::{ReliabilityTarget, RequiredSampleSize};
pub use report::{
    CertificationResult, DiagnosticsResult, ExperimentResult, HierarchyResult, OutputFormat,
    PlanResult, Provenance, ReportDoc, TargetAssessment,
};
pub use synth::{ExperimentRow, MonteCarloSummary, SyntheticDesign, YearRange};
pub use testsets::{DiagnosticFlag, FlagKind, Sample, TestHierarchy};
pub use threshold::{LabeledScore, OperatingPoint, TnrReport};
