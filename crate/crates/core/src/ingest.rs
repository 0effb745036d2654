//! Prediction-log and rater-file ingestion.
//!
//! The prediction log is a CSV with header `sample_id,actual_age,estimate`
//! and an optional fourth `tags` column holding `;`-separated tags. Rater
//! files share the first two columns and carry one estimate column per
//! rater, with ragged rows allowed. All numeric fields must be finite;
//! estimates may be negative and are never clamped, ages may not be.

use std::collections::HashMap;
use std::io::Read;

use sha2::{Digest, Sha256};

use crate::error::{Error, ParseFailure, Result, RowError, RowErrorKind};
use crate::testsets::Sample;
use crate::threshold::LabeledScore;

/// How parse failures in individual rows are handled.
///
/// `Strict` collects every bad row and fails the whole parse; `Lenient`
/// skips bad rows and reports them alongside the surviving samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

/// Samples that parsed plus the rows that did not.
///
/// In strict mode `skipped` is always empty: any bad row fails the parse.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub samples: Vec<Sample>,
    pub skipped: Vec<RowError>,
}

/// One row of a rater file.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterRow {
    pub sample_id: String,
    pub actual_age: f64,
    pub estimates: Vec<f64>,
}

/// A parsed rater file plus the rows that were skipped in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterOutcome {
    pub rows: Vec<RaterRow>,
    pub skipped: Vec<RowError>,
}

/// How multiple rater estimates collapse into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationPolicy {
    Mean,
    /// Largest estimate; for threshold setting this is the conservative
    /// choice, since higher positive scores push thresholds up, never down.
    WorstCase,
}

struct RowCollector {
    mode: ParseMode,
    errors: Vec<RowError>,
}

impl RowCollector {
    fn new(mode: ParseMode) -> Self {
        Self {
            mode,
            errors: Vec::new(),
        }
    }

    fn push(&mut self, line: u64, kind: RowErrorKind, message: impl Into<String>) {
        self.errors.push(RowError {
            line,
            kind,
            message: message.into(),
        });
    }

    fn finish(self) -> Result<Vec<RowError>> {
        match self.mode {
            ParseMode::Strict if !self.errors.is_empty() => {
                Err(Error::Parse(ParseFailure {
                    errors: self.errors,
                }))
            }
            _ => Ok(self.errors),
        }
    }
}

fn reader_for<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_finite(field: &str, what: &str) -> std::result::Result<f64, (RowErrorKind, String)> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| (RowErrorKind::BadNumber, format!("{what} `{field}` is not a number")))?;
    if !value.is_finite() {
        return Err((
            RowErrorKind::NonFinite,
            format!("{what} `{field}` is not finite"),
        ));
    }
    Ok(value)
}

/// Parses a prediction log from any reader.
///
/// Line numbers in row errors are 1-based and count the header, so the first
/// data row is line 2. Duplicate sample ids keep the first occurrence; the
/// later row is the one reported.
pub fn parse_prediction_log<R: Read>(input: R, mode: ParseMode) -> Result<ParseOutcome> {
    let mut reader = reader_for(input);
    let mut collector = RowCollector::new(mode);

    match reader.headers() {
        Ok(headers) => {
            let fields: Vec<&str> = headers.iter().collect();
            let ok = matches!(
                fields.as_slice(),
                ["sample_id", "actual_age", "estimate"]
                    | ["sample_id", "actual_age", "estimate", "tags"]
            );
            if !ok {
                collector.push(
                    1,
                    RowErrorKind::BadHeader,
                    format!(
                        "expected `sample_id,actual_age,estimate[,tags]`, got `{}`",
                        fields.join(",")
                    ),
                );
                let skipped = collector.finish()?;
                return Ok(ParseOutcome {
                    samples: Vec::new(),
                    skipped,
                });
            }
        }
        Err(e) => {
            collector.push(1, RowErrorKind::Encoding, e.to_string());
            let skipped = collector.finish()?;
            return Ok(ParseOutcome {
                samples: Vec::new(),
                skipped,
            });
        }
    }

    let mut samples: Vec<Sample> = Vec::new();
    let mut first_line_of: HashMap<String, u64> = HashMap::new();
    for item in reader.records() {
        let record = match item {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                collector.push(line, RowErrorKind::Encoding, e.to_string());
                continue;
            }
        };
        let line = record_line(&record);
        if record.len() != 3 && record.len() != 4 {
            collector.push(
                line,
                RowErrorKind::BadArity,
                format!("expected 3 or 4 fields, got {}", record.len()),
            );
            continue;
        }
        let sample_id = record[0].to_string();
        if sample_id.is_empty() {
            collector.push(line, RowErrorKind::EmptyField, "empty sample_id");
            continue;
        }
        let actual_age = match parse_finite(&record[1], "actual_age") {
            Ok(v) => v,
            Err((kind, msg)) => {
                collector.push(line, kind, msg);
                continue;
            }
        };
        if actual_age < 0.0 {
            collector.push(
                line,
                RowErrorKind::NegativeAge,
                format!("actual_age {actual_age} is negative"),
            );
            continue;
        }
        let estimate = match parse_finite(&record[2], "estimate") {
            Ok(v) => v,
            Err((kind, msg)) => {
                collector.push(line, kind, msg);
                continue;
            }
        };
        if let Some(&first) = first_line_of.get(&sample_id) {
            collector.push(
                line,
                RowErrorKind::DuplicateId,
                format!("duplicate sample id `{sample_id}` (first seen at line {first})"),
            );
            continue;
        }
        first_line_of.insert(sample_id.clone(), line);

        let mut sample = Sample::new(sample_id, actual_age, estimate);
        if record.len() == 4 {
            for tag in record[3].split(';').filter(|t| !t.is_empty()) {
                sample.tags.insert(tag.to_string());
            }
        }
        samples.push(sample);
    }

    let skipped = collector.finish()?;
    Ok(ParseOutcome { samples, skipped })
}

/// Parses a rater file: `sample_id,actual_age` then one column per rater.
///
/// Rows may be ragged; empty estimate cells are ignored, but each row needs
/// at least one estimate. The header must start with the two fixed columns.
pub fn parse_rater_file<R: Read>(input: R, mode: ParseMode) -> Result<RaterOutcome> {
    let mut reader = reader_for(input);
    let mut collector = RowCollector::new(mode);

    match reader.headers() {
        Ok(headers) => {
            let fields: Vec<&str> = headers.iter().collect();
            if fields.len() < 3 || fields[0] != "sample_id" || fields[1] != "actual_age" {
                collector.push(
                    1,
                    RowErrorKind::BadHeader,
                    format!(
                        "expected `sample_id,actual_age` plus rater columns, got `{}`",
                        fields.join(",")
                    ),
                );
                let skipped = collector.finish()?;
                return Ok(RaterOutcome {
                    rows: Vec::new(),
                    skipped,
                });
            }
        }
        Err(e) => {
            collector.push(1, RowErrorKind::Encoding, e.to_string());
            let skipped = collector.finish()?;
            return Ok(RaterOutcome {
                rows: Vec::new(),
                skipped,
            });
        }
    }

    let mut rows: Vec<RaterRow> = Vec::new();
    let mut first_line_of: HashMap<String, u64> = HashMap::new();
    'rows: for item in reader.records() {
        let record = match item {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                collector.push(line, RowErrorKind::Encoding, e.to_string());
                continue;
            }
        };
        let line = record_line(&record);
        if record.len() < 3 {
            collector.push(
                line,
                RowErrorKind::BadArity,
                format!("expected at least 3 fields, got {}", record.len()),
            );
            continue;
        }
        let sample_id = record[0].to_string();
        if sample_id.is_empty() {
            collector.push(line, RowErrorKind::EmptyField, "empty sample_id");
            continue;
        }
        let actual_age = match parse_finite(&record[1], "actual_age") {
            Ok(v) => v,
            Err((kind, msg)) => {
                collector.push(line, kind, msg);
                continue;
            }
        };
        if actual_age < 0.0 {
            collector.push(
                line,
                RowErrorKind::NegativeAge,
                format!("actual_age {actual_age} is negative"),
            );
            continue;
        }
        let mut estimates = Vec::with_capacity(record.len() - 2);
        for field in record.iter().skip(2) {
            if field.is_empty() {
                continue;
            }
            match parse_finite(field, "estimate") {
                Ok(v) => estimates.push(v),
                Err((kind, msg)) => {
                    collector.push(line, kind, msg);
                    continue 'rows;
                }
            }
        }
        if estimates.is_empty() {
            collector.push(line, RowErrorKind::EmptyField, "row has no estimates");
            continue;
        }
        if let Some(&first) = first_line_of.get(&sample_id) {
            collector.push(
                line,
                RowErrorKind::DuplicateId,
                format!("duplicate sample id `{sample_id}` (first seen at line {first})"),
            );
            continue;
        }
        first_line_of.insert(sample_id.clone(), line);
        rows.push(RaterRow {
            sample_id,
            actual_age,
            estimates,
        });
    }

    let skipped = collector.finish()?;
    Ok(RaterOutcome { rows, skipped })
}

/// Collapses rater rows into samples under the given policy.
///
/// Each sample gains a `raters:<n>` tag recording how many estimates it
/// aggregates. Row order is preserved.
pub fn aggregate_raters(rows: &[RaterRow], policy: AggregationPolicy) -> Result<Vec<Sample>> {
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.estimates.is_empty() {
            return Err(Error::EmptyRaterList {
                sample_id: row.sample_id.clone(),
            });
        }
        for &estimate in &row.estimates {
            if !estimate.is_finite() {
                return Err(Error::NonFiniteScore {
                    sample_id: row.sample_id.clone(),
                });
            }
        }
        if seen.insert(row.sample_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateSampleId {
                sample_id: row.sample_id.clone(),
            });
        }
        let estimate = match policy {
            AggregationPolicy::Mean => {
                row.estimates.iter().sum::<f64>() / row.estimates.len() as f64
            }
            AggregationPolicy::WorstCase => {
                row.estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        };
        let sample = Sample::new(row.sample_id.clone(), row.actual_age, estimate)
            .tagged(format!("raters:{}", row.estimates.len()));
        out.push(sample);
    }
    Ok(out)
}

/// Splits samples into (positives, negatives) at `legal_age`.
///
/// Strictly younger than the legal age is positive; exactly at it is
/// negative. Every sample lands in exactly one half.
pub fn split_by_legal_age(
    samples: &[Sample],
    legal_age: f64,
) -> (Vec<LabeledScore>, Vec<LabeledScore>) {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for sample in samples {
        let labeled = sample.labeled(legal_age);
        if labeled.is_positive {
            positives.push(labeled);
        } else {
            negatives.push(labeled);
        }
    }
    (positives, negatives)
}

/// Renders samples as the canonical prediction log: 4-column header, rows in
/// the given order, numbers in shortest form, LF line endings.
pub fn write_prediction_log(samples: &[Sample]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["sample_id", "actual_age", "estimate", "tags"])
        .expect("writing to memory cannot fail");
    for sample in samples {
        let tags = sample.tags.iter().cloned().collect::<Vec<_>>().join(";");
        writer
            .write_record([
                sample.sample_id.as_str(),
                &sample.actual_age.to_string(),
                &sample.estimate.to_string(),
                &tags,
            ])
            .expect("writing to memory cannot fail");
    }
    let bytes = writer.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// Content hash of the canonical CSV form, as `sha256:<hex>`.
///
/// Two logs that parse to the same samples fingerprint identically even if
/// their raw bytes differ (CRLF endings, field quoting, number spelling).
pub fn dataset_fingerprint(samples: &[Sample]) -> String {
    let canonical = write_prediction_log(samples);
    let digest = Sha256::digest(canonical.as_bytes());
    format!("sha256:{}", hex::encode(digest))
}
