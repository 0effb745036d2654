//! Certification reports and their renderings.
//!
//! Every report is a plain struct that serializes to JSON under the
//! `zerofail/1` schema and also renders to Markdown for people and CSV for
//! spreadsheets. JSON and CSV carry full-precision doubles; Markdown rounds
//! rates and thresholds to four decimal places. A TNR with no eligible
//! samples renders as `n/a`, never as a zero rate.

use std::fmt::Write as _;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest;
use crate::reliability::{achieved_confidence, demonstrated_reliability, required_sample_size, ReliabilityTarget};
use crate::synth::ExperimentRow;
use crate::testsets::{self, DiagnosticFlag, Sample, TestHierarchy};
use crate::threshold::{
    normalized_hysteresis, tnr_at, zero_failure_threshold, LabeledScore, OperatingPoint,
    TnrReport,
};

/// Schema identifier stamped into every JSON report.
pub const SCHEMA: &str = "zerofail/1";

const KIND_PLAN: &str = "plan";
const KIND_CERTIFICATION: &str = "certification";
const KIND_HIERARCHY: &str = "hierarchy";
const KIND_EXPERIMENT: &str = "experiment";
const KIND_DIAGNOSTICS: &str = "diagnostics";

/// Where a report came from: input hash, tool version, wall-clock time,
/// and the RNG seed when randomness was involved.
///
/// The timestamp is informational only; dataset fingerprints depend on the
/// data alone, so re-running a report later changes the timestamp field and
/// nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_fingerprint: Option<String>,
    pub tool_version: String,
    pub timestamp: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn now(dataset_fingerprint: Option<String>, seed: Option<u64>) -> Self {
        Self {
            dataset_fingerprint,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            seed,
        }
    }
}

/// How a positive set measures up against a planning target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAssessment {
    pub confidence: f64,
    pub reliability: f64,
    pub required_exact: f64,
    pub required_ceiling: u64,
    pub used_samples: u64,
    /// Samples missing to meet the target; zero when the set is big enough.
    pub shortfall: u64,
    /// Confidence the used sample count actually establishes.
    pub achieved_confidence: f64,
}

/// Zero-failure certification of one positive set against one negative set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationResult {
    pub schema: String,
    pub kind: String,
    pub set_name: String,
    pub positive_count: u64,
    pub negative_count: u64,
    pub operating_point: OperatingPoint,
    pub tnr_reports: Vec<TnrReport>,
    pub target_assessment: Option<TargetAssessment>,
    pub provenance: Provenance,
}

/// A level that reuses the threshold source of the level below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedThresholdSource {
    pub level: String,
    pub source_sample_id: String,
}

/// Certification of every level of a nested hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyResult {
    pub schema: String,
    pub kind: String,
    pub levels: Vec<CertificationResult>,
    /// True when thresholds never fall and TNRs never rise across levels,
    /// which nesting guarantees; recorded so consumers need not recheck.
    pub monotonicity_ok: bool,
    pub shared_threshold_sources: Vec<SharedThresholdSource>,
    pub provenance: Provenance,
}

/// One certification row per synthetic design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema: String,
    pub kind: String,
    pub rows: Vec<CertificationResult>,
    pub provenance: Provenance,
}

/// Test-size plan for one reliability target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub schema: String,
    pub kind: String,
    pub confidence: f64,
    pub reliability: f64,
    pub required_exact: f64,
    pub required_ceiling: u64,
    pub achieved_confidence_at_ceiling: f64,
    pub demonstrated_reliability_at_ceiling: f64,
    pub provenance: Provenance,
}

/// Hard examples mined at one hysteresis age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardExampleGroup {
    pub hysteresis_age: f64,
    pub flags: Vec<DiagnosticFlag>,
}

/// Dataset curation report: clerical suspects, hard examples, attack tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsResult {
    pub schema: String,
    pub kind: String,
    pub legal_age: f64,
    pub clerical_gap_years: f64,
    pub clerical_suspects: Vec<DiagnosticFlag>,
    pub hard_examples: Vec<HardExampleGroup>,
    pub attack_tagged: Vec<DiagnosticFlag>,
    pub provenance: Provenance,
}

/// Any report this crate can produce or re-read.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportDoc {
    Plan(PlanResult),
    Certification(CertificationResult),
    Hierarchy(HierarchyResult),
    Experiment(ExperimentResult),
    Diagnostics(DiagnosticsResult),
}

/// Output encodings for [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Json,
    #[default]
    Markdown,
    Csv,
}

fn assess(target: &ReliabilityTarget, used_samples: u64) -> Result<TargetAssessment> {
    let required = required_sample_size(target)?;
    Ok(TargetAssessment {
        confidence: target.confidence,
        reliability: target.reliability,
        required_exact: required.exact,
        required_ceiling: required.ceiling,
        used_samples,
        shortfall: required.ceiling.saturating_sub(used_samples),
        achieved_confidence: achieved_confidence(used_samples, target.reliability)?,
    })
}

/// Plans a test size and packages the result.
pub fn plan_report(target: &ReliabilityTarget) -> Result<PlanResult> {
    let required = required_sample_size(target)?;
    Ok(PlanResult {
        schema: SCHEMA.to_string(),
        kind: KIND_PLAN.to_string(),
        confidence: target.confidence,
        reliability: target.reliability,
        required_exact: required.exact,
        required_ceiling: required.ceiling,
        achieved_confidence_at_ceiling: achieved_confidence(
            required.ceiling,
            target.reliability,
        )?,
        demonstrated_reliability_at_ceiling: demonstrated_reliability(
            required.ceiling,
            target.confidence,
        )?,
        provenance: Provenance::now(None, None),
    })
}

/// Certifies one positive set: zero-failure threshold plus TNR at every
/// hysteresis age, with an optional check against a planning target.
pub fn certify(
    positives: &[LabeledScore],
    negatives: &[LabeledScore],
    hysteresis_ages: &[f64],
    target: Option<&ReliabilityTarget>,
    set_name: &str,
    provenance: Provenance,
) -> Result<CertificationResult> {
    let operating_point = zero_failure_threshold(positives)?;
    let tnr_reports = normalized_hysteresis(hysteresis_ages)
        .into_iter()
        .map(|age| tnr_at(negatives, &operating_point, age))
        .collect::<Result<Vec<_>>>()?;
    let target_assessment = target
        .map(|t| assess(t, positives.len() as u64))
        .transpose()?;
    Ok(CertificationResult {
        schema: SCHEMA.to_string(),
        kind: KIND_CERTIFICATION.to_string(),
        set_name: set_name.to_string(),
        positive_count: positives.len() as u64,
        negative_count: negatives.len() as u64,
        operating_point,
        tnr_reports,
        target_assessment,
        provenance,
    })
}

/// Certifies every level of a hierarchy against one negative set.
///
/// Levels are named `level-1` upward, smallest first. The result records
/// whether thresholds and TNRs moved monotonically (they must, for a true
/// chain) and which levels reuse a smaller level's threshold source.
pub fn certify_hierarchy(
    hierarchy: &TestHierarchy,
    negatives: &[LabeledScore],
    hysteresis_ages: &[f64],
    provenance: Provenance,
) -> Result<HierarchyResult> {
    let level_provenance = Provenance {
        seed: hierarchy.seed().or(provenance.seed),
        ..provenance.clone()
    };
    let mut levels = Vec::with_capacity(hierarchy.levels().len());
    for index in 0..hierarchy.levels().len() {
        let positives = hierarchy.labeled_level(index);
        levels.push(certify(
            &positives,
            negatives,
            hysteresis_ages,
            None,
            &format!("level-{}", index + 1),
            level_provenance.clone(),
        )?);
    }

    let mut monotonicity_ok = true;
    let mut shared_threshold_sources = Vec::new();
    for (index, pair) in levels.windows(2).enumerate() {
        let (below, above) = (&pair[0], &pair[1]);
        if above.operating_point.threshold < below.operating_point.threshold {
            monotonicity_ok = false;
        }
        for (a, b) in below.tnr_reports.iter().zip(&above.tnr_reports) {
            if a.is_defined() && b.is_defined() && b.tnr > a.tnr {
                monotonicity_ok = false;
            }
        }
        if above.operating_point.threshold == below.operating_point.threshold {
            shared_threshold_sources.push(SharedThresholdSource {
                level: format!("level-{}", index + 2),
                source_sample_id: above.operating_point.source_sample_id.clone(),
            });
        }
    }

    Ok(HierarchyResult {
        schema: SCHEMA.to_string(),
        kind: KIND_HIERARCHY.to_string(),
        levels,
        monotonicity_ok,
        shared_threshold_sources,
        provenance,
    })
}

/// Packages experiment rows, each optionally assessed against its target.
pub fn experiment_report(
    entries: &[(Option<ReliabilityTarget>, ExperimentRow)],
) -> Result<ExperimentResult> {
    let provenance = Provenance::now(None, None);
    let mut rows = Vec::with_capacity(entries.len());
    for (target, row) in entries {
        let target_assessment = target
            .as_ref()
            .map(|t| assess(t, row.positive_count as u64))
            .transpose()?;
        rows.push(CertificationResult {
            schema: SCHEMA.to_string(),
            kind: KIND_CERTIFICATION.to_string(),
            set_name: format!("synthetic-{}", row.positive_count),
            positive_count: row.positive_count as u64,
            negative_count: row.negative_count as u64,
            operating_point: row.operating_point.clone(),
            tnr_reports: row.tnr_reports.clone(),
            target_assessment,
            provenance: Provenance {
                dataset_fingerprint: Some(row.dataset_fingerprint.clone()),
                tool_version: provenance.tool_version.clone(),
                timestamp: provenance.timestamp.clone(),
                seed: Some(row.design.seed),
            },
        });
    }
    Ok(ExperimentResult {
        schema: SCHEMA.to_string(),
        kind: KIND_EXPERIMENT.to_string(),
        rows,
        provenance,
    })
}

/// Mines a dataset for curation problems.
///
/// Clerical suspects come from the whole dataset; hard examples from the
/// positives only, one group per hysteresis age.
pub fn diagnostics_report(
    samples: &[Sample],
    clerical_gap_years: f64,
    legal_age: f64,
    hysteresis_ages: &[f64],
) -> Result<DiagnosticsResult> {
    let clerical_suspects = testsets::flag_clerical_suspects(samples, clerical_gap_years)?;
    let positives: Vec<Sample> = samples
        .iter()
        .filter(|s| s.actual_age < legal_age)
        .cloned()
        .collect();
    let hard_examples = normalized_hysteresis(hysteresis_ages)
        .into_iter()
        .map(|age| HardExampleGroup {
            hysteresis_age: age,
            flags: testsets::hard_examples(&positives, age),
        })
        .collect();
    Ok(DiagnosticsResult {
        schema: SCHEMA.to_string(),
        kind: KIND_DIAGNOSTICS.to_string(),
        legal_age,
        clerical_gap_years,
        clerical_suspects,
        hard_examples,
        attack_tagged: testsets::attack_tagged(samples),
        provenance: Provenance::now(Some(ingest::dataset_fingerprint(samples)), None),
    })
}

/// Renders a report in the requested format.
pub fn render(doc: &ReportDoc, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => render_json(doc),
        OutputFormat::Markdown => render_markdown(doc),
        OutputFormat::Csv => render_csv(doc),
    }
}

/// Re-reads a JSON report, checking schema and kind.
pub fn parse_report(json: &str) -> Result<ReportDoc> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    let schema = value
        .get("schema")
        .and_then(|v| v.as_str())
        .unwrap_or_default();
    if schema != SCHEMA {
        return Err(Error::SchemaMismatch {
            found: schema.to_string(),
            expected: SCHEMA,
        });
    }
    let kind = value
        .get("kind")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    match kind.as_str() {
        KIND_PLAN => Ok(ReportDoc::Plan(serde_json::from_value(value)?)),
        KIND_CERTIFICATION => Ok(ReportDoc::Certification(serde_json::from_value(value)?)),
        KIND_HIERARCHY => Ok(ReportDoc::Hierarchy(serde_json::from_value(value)?)),
        KIND_EXPERIMENT => Ok(ReportDoc::Experiment(serde_json::from_value(value)?)),
        KIND_DIAGNOSTICS => Ok(ReportDoc::Diagnostics(serde_json::from_value(value)?)),
        other => Err(Error::UnknownReportKind(other.to_string())),
    }
}

fn render_json(doc: &ReportDoc) -> String {
    let json = match doc {
        ReportDoc::Plan(r) => serde_json::to_string_pretty(r),
        ReportDoc::Certification(r) => serde_json::to_string_pretty(r),
        ReportDoc::Hierarchy(r) => serde_json::to_string_pretty(r),
        ReportDoc::Experiment(r) => serde_json::to_string_pretty(r),
        ReportDoc::Diagnostics(r) => serde_json::to_string_pretty(r),
    };
    let mut out = json.expect("report types always serialize");
    out.push('\n');
    out
}

fn fmt4(value: f64) -> String {
    format!("{value:.4}")
}

fn fmt_tnr(report: &TnrReport) -> String {
    if report.is_defined() {
        fmt4(report.tnr)
    } else {
        "n/a".to_string()
    }
}

fn push_provenance(out: &mut String, provenance: &Provenance) {
    if let Some(fingerprint) = &provenance.dataset_fingerprint {
        let _ = writeln!(out, "- dataset fingerprint: {fingerprint}");
    }
    if let Some(seed) = provenance.seed {
        let _ = writeln!(out, "- seed: {seed}");
    }
    let _ = writeln!(
        out,
        "- generated: {} by zerofail {}",
        provenance.timestamp, provenance.tool_version
    );
}

fn push_tnr_table(out: &mut String, reports: &[TnrReport]) {
    let _ = writeln!(out, "| hysteresis age | eligible | true negatives | TNR |");
    let _ = writeln!(out, "| ---: | ---: | ---: | ---: |");
    for report in reports {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            report.hysteresis_age,
            report.eligible_count,
            report.true_negative_count,
            fmt_tnr(report)
        );
    }
}

fn push_assessment(out: &mut String, assessment: &TargetAssessment) {
    let status = if assessment.shortfall == 0 {
        format!("{} used", assessment.used_samples)
    } else {
        format!(
            "{} used, {} short",
            assessment.used_samples, assessment.shortfall
        )
    };
    let _ = writeln!(
        out,
        "\nTarget {} confidence of {} reliability: requires {} samples ({} exact); {status}; achieved confidence {}.",
        assessment.confidence,
        assessment.reliability,
        assessment.required_ceiling,
        fmt4(assessment.required_exact),
        fmt4(assessment.achieved_confidence)
    );
}

fn md_certification(out: &mut String, result: &CertificationResult) {
    let _ = writeln!(out, "# Zero-failure certification: {}\n", result.set_name);
    let _ = writeln!(out, "- positive samples: {}", result.positive_count);
    let _ = writeln!(out, "- negative samples: {}", result.negative_count);
    let _ = writeln!(
        out,
        "- operating threshold: {} (source sample `{}`, {} allowed failures)",
        fmt4(result.operating_point.threshold),
        result.operating_point.source_sample_id,
        result.operating_point.k_allowed_failures
    );
    push_provenance(out, &result.provenance);
    let _ = writeln!(out);
    push_tnr_table(out, &result.tnr_reports);
    if let Some(assessment) = &result.target_assessment {
        push_assessment(out, assessment);
    }
}

fn tnr_headers(levels: &[CertificationResult]) -> Vec<f64> {
    levels
        .first()
        .map(|l| l.tnr_reports.iter().map(|r| r.hysteresis_age).collect())
        .unwrap_or_default()
}

fn md_hierarchy(out: &mut String, result: &HierarchyResult) {
    let _ = writeln!(out, "# Hierarchy certification\n");
    let sizes: Vec<String> = result
        .levels
        .iter()
        .map(|l| l.positive_count.to_string())
        .collect();
    let _ = writeln!(
        out,
        "- levels: {} (sizes {})",
        result.levels.len(),
        sizes.join(", ")
    );
    let _ = writeln!(
        out,
        "- thresholds non-decreasing and TNRs non-increasing: {}",
        if result.monotonicity_ok { "yes" } else { "NO" }
    );
    push_provenance(out, &result.provenance);
    let _ = writeln!(out);

    let ages = tnr_headers(&result.levels);
    let mut header = String::from("| level | positives | threshold |");
    let mut rule = String::from("| :-- | ---: | ---: |");
    for age in &ages {
        let _ = write!(header, " TNR@{age} |");
        rule.push_str(" ---: |");
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{rule}");
    for level in &result.levels {
        let _ = write!(
            out,
            "| {} | {} | {} |",
            level.set_name,
            level.positive_count,
            fmt4(level.operating_point.threshold)
        );
        for report in &level.tnr_reports {
            let _ = write!(out, " {} |", fmt_tnr(report));
        }
        let _ = writeln!(out);
    }
    for shared in &result.shared_threshold_sources {
        let _ = writeln!(
            out,
            "\n{} reuses threshold source `{}` from the level below it.",
            shared.level, shared.source_sample_id
        );
    }
}

fn md_experiment(out: &mut String, result: &ExperimentResult) {
    let _ = writeln!(out, "# Synthetic certification table\n");
    push_provenance(out, &result.provenance);
    let _ = writeln!(out);

    let ages = tnr_headers(&result.rows);
    let mut header = String::from("| target (confidence, reliability) | positives | negatives | threshold |");
    let mut rule = String::from("| :-- | ---: | ---: | ---: |");
    for age in &ages {
        let _ = write!(header, " TNR@{age} |");
        rule.push_str(" ---: |");
    }
    header.push_str(" seed |");
    rule.push_str(" ---: |");
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{rule}");
    for row in &result.rows {
        let target = row
            .target_assessment
            .as_ref()
            .map(|a| format!("({}, {})", a.confidence, a.reliability))
            .unwrap_or_else(|| "-".to_string());
        let _ = write!(
            out,
            "| {target} | {} | {} | {} |",
            row.positive_count,
            row.negative_count,
            fmt4(row.operating_point.threshold)
        );
        for report in &row.tnr_reports {
            let _ = write!(out, " {} |", fmt_tnr(report));
        }
        let seed = row
            .provenance
            .seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(out, " {seed} |");
    }
}

fn md_plan(out: &mut String, result: &PlanResult) {
    let _ = writeln!(out, "# Test-size plan\n");
    let _ = writeln!(out, "- confidence target: {}", result.confidence);
    let _ = writeln!(out, "- reliability target: {}", result.reliability);
    let _ = writeln!(
        out,
        "- required sample size: {} exact, {} after ceiling",
        fmt4(result.required_exact),
        result.required_ceiling
    );
    let _ = writeln!(
        out,
        "- at {} samples: confidence {}, demonstrated reliability {}",
        result.required_ceiling,
        fmt4(result.achieved_confidence_at_ceiling),
        fmt4(result.demonstrated_reliability_at_ceiling)
    );
    push_provenance(out, &result.provenance);
}

fn push_flag_table(out: &mut String, flags: &[DiagnosticFlag]) {
    if flags.is_empty() {
        let _ = writeln!(out, "none\n");
        return;
    }
    let _ = writeln!(out, "| sample | severity | detail |");
    let _ = writeln!(out, "| :-- | ---: | :-- |");
    for flag in flags {
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            flag.sample_id,
            fmt4(flag.severity_score),
            flag.detail
        );
    }
    let _ = writeln!(out);
}

fn md_diagnostics(out: &mut String, result: &DiagnosticsResult) {
    let _ = writeln!(out, "# Dataset diagnostics\n");
    let _ = writeln!(out, "- legal age: {}", result.legal_age);
    let _ = writeln!(out, "- clerical gap: {} years", result.clerical_gap_years);
    push_provenance(out, &result.provenance);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "## Clerical suspects (gap >= {} years)\n",
        result.clerical_gap_years
    );
    push_flag_table(out, &result.clerical_suspects);
    for group in &result.hard_examples {
        let _ = writeln!(out, "## Hard examples above age {}\n", group.hysteresis_age);
        push_flag_table(out, &group.flags);
    }
    let _ = writeln!(out, "## Attack-tagged samples\n");
    push_flag_table(out, &result.attack_tagged);
}

fn render_markdown(doc: &ReportDoc) -> String {
    let mut out = String::new();
    match doc {
        ReportDoc::Plan(r) => md_plan(&mut out, r),
        ReportDoc::Certification(r) => md_certification(&mut out, r),
        ReportDoc::Hierarchy(r) => md_hierarchy(&mut out, r),
        ReportDoc::Experiment(r) => md_experiment(&mut out, r),
        ReportDoc::Diagnostics(r) => md_diagnostics(&mut out, r),
    }
    out
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_finish(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("writing to memory cannot fail"))
        .expect("csv output is UTF-8")
}

fn csv_tnr(report: &TnrReport) -> String {
    if report.is_defined() {
        report.tnr.to_string()
    } else {
        String::new()
    }
}

const CERT_CSV_HEADER: [&str; 10] = [
    "set_name",
    "positive_count",
    "negative_count",
    "threshold",
    "k_allowed_failures",
    "source_sample_id",
    "hysteresis_age",
    "eligible_count",
    "true_negative_count",
    "tnr",
];

fn csv_certification_rows(writer: &mut csv::Writer<Vec<u8>>, result: &CertificationResult) {
    for report in &result.tnr_reports {
        writer
            .write_record([
                result.set_name.as_str(),
                &result.positive_count.to_string(),
                &result.negative_count.to_string(),
                &result.operating_point.threshold.to_string(),
                &result.operating_point.k_allowed_failures.to_string(),
                result.operating_point.source_sample_id.as_str(),
                &report.hysteresis_age.to_string(),
                &report.eligible_count.to_string(),
                &report.true_negative_count.to_string(),
                &csv_tnr(report),
            ])
            .expect("writing to memory cannot fail");
    }
}

fn render_csv(doc: &ReportDoc) -> String {
    let mut writer = csv_writer();
    match doc {
        ReportDoc::Plan(r) => {
            writer
                .write_record([
                    "confidence",
                    "reliability",
                    "required_exact",
                    "required_ceiling",
                    "achieved_confidence_at_ceiling",
                    "demonstrated_reliability_at_ceiling",
                ])
                .expect("writing to memory cannot fail");
            writer
                .write_record([
                    r.confidence.to_string(),
                    r.reliability.to_string(),
                    r.required_exact.to_string(),
                    r.required_ceiling.to_string(),
                    r.achieved_confidence_at_ceiling.to_string(),
                    r.demonstrated_reliability_at_ceiling.to_string(),
                ])
                .expect("writing to memory cannot fail");
        }
        ReportDoc::Certification(r) => {
            writer
                .write_record(CERT_CSV_HEADER)
                .expect("writing to memory cannot fail");
            csv_certification_rows(&mut writer, r);
        }
        ReportDoc::Hierarchy(r) => {
            writer
                .write_record(CERT_CSV_HEADER)
                .expect("writing to memory cannot fail");
            for level in &r.levels {
                csv_certification_rows(&mut writer, level);
            }
        }
        ReportDoc::Experiment(r) => {
            let mut header: Vec<&str> = vec!["confidence", "reliability"];
            header.extend(CERT_CSV_HEADER);
            header.push("seed");
            writer
                .write_record(&header)
                .expect("writing to memory cannot fail");
            for row in &r.rows {
                let (confidence, reliability) = row
                    .target_assessment
                    .as_ref()
                    .map(|a| (a.confidence.to_string(), a.reliability.to_string()))
                    .unwrap_or_default();
                let seed = row
                    .provenance
                    .seed
                    .map(|s| s.to_string())
                    .unwrap_or_default();
                for report in &row.tnr_reports {
                    writer
                        .write_record([
                            confidence.as_str(),
                            reliability.as_str(),
                            row.set_name.as_str(),
                            &row.positive_count.to_string(),
                            &row.negative_count.to_string(),
                            &row.operating_point.threshold.to_string(),
                            &row.operating_point.k_allowed_failures.to_string(),
                            row.operating_point.source_sample_id.as_str(),
                            &report.hysteresis_age.to_string(),
                            &report.eligible_count.to_string(),
                            &report.true_negative_count.to_string(),
                            &csv_tnr(report),
                            seed.as_str(),
                        ])
                        .expect("writing to memory cannot fail");
                }
            }
        }
        ReportDoc::Diagnostics(r) => {
            writer
                .write_record(["kind", "sample_id", "severity", "hysteresis_age", "detail"])
                .expect("writing to memory cannot fail");
            let mut rows: Vec<(String, &DiagnosticFlag)> = Vec::new();
            for flag in &r.clerical_suspects {
                rows.push((String::new(), flag));
            }
            for group in &r.hard_examples {
                for flag in &group.flags {
                    rows.push((group.hysteresis_age.to_string(), flag));
                }
            }
            for flag in &r.attack_tagged {
                rows.push((String::new(), flag));
            }
            for (age, flag) in rows {
                writer
                    .write_record([
                        flag.kind.to_string().as_str(),
                        flag.sample_id.as_str(),
                        &flag.severity_score.to_string(),
                        &age,
                        flag.detail.as_str(),
                    ])
                    .expect("writing to memory cannot fail");
            }
        }
    }
    csv_finish(writer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_provenance() -> Provenance {
        Provenance {
            dataset_fingerprint: Some("sha256:abc".to_string()),
            tool_version: "0.1.0".to_string(),
            timestamp: "2026-01-01T00:00:00Z".to_string(),
            seed: Some(0),
        }
    }

    fn small_certification() -> CertificationResult {
        let positives = vec![
            LabeledScore::positive("p1", 15.0, 16.5),
            LabeledScore::positive("p2", 16.0, 19.25),
        ];
        let negatives = vec![
            LabeledScore::negative("n1", 20.0, 22.0),
            LabeledScore::negative("n2", 26.0, 18.0),
            LabeledScore::negative("n3", 31.0, 33.0),
        ];
        certify(
            &positives,
            &negatives,
            &[18.0, 25.0, 30.0],
            Some(&ReliabilityTarget {
                confidence: 0.95,
                reliability: 0.95,
            }),
            "unit",
            fixed_provenance(),
        )
        .unwrap()
    }

    #[test]
    fn certification_assembles_all_parts() {
        let result = small_certification();
        assert_eq!(result.schema, SCHEMA);
        assert_eq!(result.kind, "certification");
        assert_eq!(result.positive_count, 2);
        assert_eq!(result.negative_count, 3);
        assert_eq!(result.operating_point.threshold, 19.25);
        assert_eq!(result.tnr_reports.len(), 3);
        let assessment = result.target_assessment.as_ref().unwrap();
        assert_eq!(assessment.required_ceiling, 59);
        assert_eq!(assessment.shortfall, 57);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let doc = ReportDoc::Certification(small_certification());
        let first = render(&doc, OutputFormat::Json);
        let reparsed = parse_report(&first).unwrap();
        assert_eq!(reparsed, doc);
        let second = render(&reparsed, OutputFormat::Json);
        assert_eq!(first, second);
    }

    #[test]
    fn parse_rejects_wrong_schema_and_kind() {
        let err = parse_report(r#"{"schema":"other/9","kind":"plan"}"#).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
        let err =
            parse_report(&format!(r#"{{"schema":"{SCHEMA}","kind":"mystery"}}"#)).unwrap_err();
        assert!(matches!(err, Error::UnknownReportKind(_)));
        assert!(parse_report("not json").is_err());
    }

    #[test]
    fn markdown_rounds_to_four_places() {
        let doc = ReportDoc::Certification(small_certification());
        let md = render(&doc, OutputFormat::Markdown);
        assert!(md.contains("| 25 | 2 | 1 | 0.5000 |"), "{md}");
        assert!(md.contains("operating threshold: 19.2500"));
        assert!(md.contains("57 short"));
    }

    #[test]
    fn undefined_tnr_renders_as_not_available() {
        let positives = vec![LabeledScore::positive("p1", 15.0, 16.5)];
        let negatives = vec![LabeledScore::negative("n1", 20.0, 22.0)];
        let result = certify(
            &positives,
            &negatives,
            &[40.0],
            None,
            "unit",
            fixed_provenance(),
        )
        .unwrap();
        let md = render(
            &ReportDoc::Certification(result.clone()),
            OutputFormat::Markdown,
        );
        assert!(md.contains("| 40 | 0 | 0 | n/a |"));
        let csv = render(&ReportDoc::Certification(result), OutputFormat::Csv);
        let last = csv.lines().last().unwrap();
        assert!(last.ends_with(",0,0,"), "{last}");
    }

    #[test]
    fn csv_emits_one_row_per_level_and_age() {
        let pool: Vec<Sample> = (0..30)
            .map(|i| Sample::new(format!("s{i:02}"), 15.0, 14.0 + i as f64 * 0.1))
            .collect();
        let hierarchy =
            crate::testsets::build_hierarchy(&pool, &[5, 15, 30], 1, 18.0).unwrap();
        let negatives = vec![LabeledScore::negative("n1", 26.0, 30.0)];
        let result =
            certify_hierarchy(&hierarchy, &negatives, &[18.0, 25.0], fixed_provenance())
                .unwrap();
        assert!(result.monotonicity_ok);
        let csv = render(&ReportDoc::Hierarchy(result), OutputFormat::Csv);
        // Header plus 3 levels x 2 ages.
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn hierarchy_detects_shared_sources() {
        let a = Sample::new("a", 15.0, 20.0);
        let b = Sample::new("b", 15.0, 14.0);
        let c = Sample::new("c", 15.0, 15.0);
        let hierarchy = TestHierarchy::from_levels(
            vec![vec![a.clone()], vec![a.clone(), b.clone()], vec![a, b, c]],
            None,
            18.0,
        )
        .unwrap();
        let negatives = vec![LabeledScore::negative("n1", 26.0, 30.0)];
        let result =
            certify_hierarchy(&hierarchy, &negatives, &[18.0], fixed_provenance()).unwrap();
        assert_eq!(result.shared_threshold_sources.len(), 2);
        assert_eq!(result.shared_threshold_sources[0].level, "level-2");
        assert_eq!(result.shared_threshold_sources[0].source_sample_id, "a");
        let seeds: Vec<Option<u64>> =
            result.levels.iter().map(|l| l.provenance.seed).collect();
        assert_eq!(seeds, vec![Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn plan_report_matches_the_planning_module() {
        let result = plan_report(&ReliabilityTarget {
            confidence: 0.95,
            reliability: 0.995,
        })
        .unwrap();
        assert!((result.required_exact - 597.6473372217685).abs() < 1e-9);
        assert_eq!(result.required_ceiling, 598);
        let md = render(&ReportDoc::Plan(result), OutputFormat::Markdown);
        assert!(md.contains("597.6473 exact, 598 after ceiling"));
    }

    #[test]
    fn diagnostics_report_groups_hard_examples() {
        let samples = vec![
            Sample::new("kid", 6.0, 42.81),
            Sample::new("teen", 17.0, 26.0),
            Sample::new("adult", 30.0, 29.0),
            Sample::new("spoof", 16.0, 27.0).tagged(crate::testsets::TAG_ATTACK),
        ];
        let result = diagnostics_report(&samples, 20.0, 18.0, &[25.0, 18.0]).unwrap();
        assert_eq!(result.clerical_suspects.len(), 1);
        assert_eq!(result.hard_examples.len(), 2);
        assert_eq!(result.hard_examples[0].hysteresis_age, 18.0);
        assert_eq!(result.hard_examples[1].flags.len(), 3);
        assert_eq!(result.attack_tagged.len(), 1);
        let md = render(&ReportDoc::Diagnostics(result), OutputFormat::Markdown);
        assert!(md.contains("## Hard examples above age 25"));
        assert!(md.contains("| kid | 36.8100 |"));
    }

    #[test]
    fn experiment_report_carries_targets_and_seeds() {
        let designs = crate::synth::standard_designs(
            &crate::synth::SyntheticDesign {
                per_year_negative: 5,
                ..Default::default()
            },
            9,
        )
        .unwrap();
        let only_designs: Vec<_> = designs.iter().map(|(_, d)| d.clone()).collect();
        let rows = crate::synth::run_table1_experiment(&only_designs, &[18.0, 25.0]).unwrap();
        let entries: Vec<_> = designs
            .iter()
            .zip(rows)
            .map(|((t, _), row)| (Some(*t), row))
            .collect();
        let result = experiment_report(&entries).unwrap();
        assert_eq!(result.rows.len(), 3);
        assert_eq!(result.rows[0].set_name, "synthetic-60");
        assert_eq!(result.rows[2].provenance.seed, Some(11));
        let md = render(&ReportDoc::Experiment(result.clone()), OutputFormat::Markdown);
        assert!(md.contains("(0.95, 0.998)"));
        // One header row, one rule row, three data rows.
        let table_rows = md.lines().filter(|l| l.starts_with('|')).count();
        assert_eq!(table_rows, 5);
        let json = render(&ReportDoc::Experiment(result), OutputFormat::Json);
        let reparsed = parse_report(&json).unwrap();
        assert_eq!(render(&reparsed, OutputFormat::Json), json);
    }
}
