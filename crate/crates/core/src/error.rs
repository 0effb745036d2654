//! Crate-wide error type and per-row parse diagnostics.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("{name} must lie strictly between 0 and 1, got {value}")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("sample count must be at least 1")]
    ZeroSampleCount,

    #[error("positive set is empty")]
    EmptyPositives,

    #[error("sample `{sample_id}` is labeled negative; the positive set must contain only positive samples")]
    NegativeInPositives { sample_id: String },

    #[error("sample `{sample_id}` is labeled positive; the negative set must contain only negative samples")]
    PositiveInNegatives { sample_id: String },

    #[error("sample `{sample_id}` has a non-finite score")]
    NonFiniteScore { sample_id: String },

    #[error("allowing {k} failures requires more than {available} positive samples")]
    TooManyFailures { k: usize, available: usize },

    #[error("hierarchy sizes are empty")]
    EmptySizes,

    #[error("hierarchy sizes must be strictly ascending, got {sizes:?}")]
    SizesNotAscending { sizes: Vec<usize> },

    #[error("largest hierarchy size {size} exceeds the positive pool of {pool} samples")]
    SizeExceedsPool { size: usize, pool: usize },

    #[error("sample `{sample_id}` has actual age {actual_age}, at or above the legal age {legal_age}")]
    NotUnderLegalAge {
        sample_id: String,
        actual_age: f64,
        legal_age: f64,
    },

    #[error("duplicate sample id `{sample_id}`")]
    DuplicateSampleId { sample_id: String },

    #[error("level {index} of the hierarchy is not a proper subset of the next level")]
    NotNested { index: usize },

    #[error("attack set is empty; a one-level hierarchy needs no attack extension")]
    EmptyAttacks,

    #[error("sample `{sample_id}` appears in both the regular and the attack set")]
    IdCollision { sample_id: String },

    #[error("attack sample `{sample_id}` is missing the `attack` tag")]
    MissingAttackTag { sample_id: String },

    #[error("gap must be positive, got {0}")]
    NonPositiveGap(f64),

    #[error("age range {min}..{max} is empty")]
    EmptyAgeRange { min: u32, max: u32 },

    #[error("positive ages {positive} must lie strictly below negative ages {negative}")]
    AgeRangesOverlap { positive: String, negative: String },

    #[error("per-year sample count must be at least 1")]
    ZeroPerYearCount,

    #[error("noise sigma must be positive and finite, got {0}")]
    InvalidNoiseSigma(f64),

    #[error("noise mean must be finite, got {0}")]
    InvalidNoiseMean(f64),

    #[error("trial count must be at least 1")]
    ZeroTrials,

    #[error("sample `{sample_id}` has no rater estimates")]
    EmptyRaterList { sample_id: String },

    #[error(transparent)]
    Parse(#[from] ParseFailure),

    #[error("report schema is `{found}`, expected `{expected}`")]
    SchemaMismatch { found: String, expected: &'static str },

    #[error("unknown report kind `{0}`")]
    UnknownReportKind(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A batch of row-level failures from one parse pass.
///
/// Strict-mode parsing collects every bad row before failing, so a single
/// run reports all problems instead of the first one.
#[derive(Debug, Error)]
pub struct ParseFailure {
    pub errors: Vec<RowError>,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{} row(s) failed to parse:", self.errors.len())?;
        for e in &self.errors {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

/// What went wrong in a single CSV row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowErrorKind {
    BadHeader,
    BadArity,
    BadNumber,
    NonFinite,
    NegativeAge,
    EmptyField,
    DuplicateId,
    Encoding,
}

impl std::fmt::Display for RowErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::BadHeader => "bad header",
            Self::BadArity => "bad arity",
            Self::BadNumber => "bad number",
            Self::NonFinite => "non-finite value",
            Self::NegativeAge => "negative age",
            Self::EmptyField => "empty field",
            Self::DuplicateId => "duplicate id",
            Self::Encoding => "encoding error",
        };
        f.write_str(s)
    }
}

/// One rejected row, with its 1-based line number in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub kind: RowErrorKind,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.kind, self.message)
    }
}
