//! Command-line front end: plan test sizes, certify prediction logs, sample
//! hierarchies, run synthetic experiments, and mine dataset diagnostics.
//!
//! Reports go to stdout (or `--out`); warnings and errors go to stderr.
//! Exit codes: 0 on success, 2 on usage, parse, or domain errors (clap uses
//! the same code for bad flags), 3 when the input holds no positive samples.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use zerofail::error::Error;
use zerofail::ingest::{self, ParseMode};
use zerofail::reliability::ReliabilityTarget;
use zerofail::report::{self, OutputFormat, Provenance, ReportDoc};
use zerofail::synth::{self, SyntheticDesign, YearRange};
use zerofail::testsets::{self, Sample};

const EXIT_USAGE: u8 = 2;
const EXIT_NO_POSITIVES: u8 = 3;

#[derive(Parser)]
#[command(
    name = "zerofail",
    version,
    about = "Zero-failure certification of age-estimation classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    config: Config,
}

#[derive(Args)]
struct Config {
    /// Legal age separating positives (strictly younger) from negatives.
    #[arg(long, global = true, default_value_t = 18.0)]
    legal_age: f64,

    /// Hysteresis ages for TNR reporting, ascending, each at least the
    /// legal age.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        num_args = 1..,
        default_values_t = vec![18.0, 25.0, 30.0]
    )]
    hysteresis: Vec<f64>,

    /// RNG seed for sampling and generation; recorded in reports.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Markdown)]
    format: Format,

    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Skip malformed CSV rows (reported on stderr) instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Markdown,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(format: Format) -> Self {
        match format {
            Format::Json => Self::Json,
            Format::Markdown => Self::Markdown,
            Format::Csv => Self::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the zero-failure test size a reliability target requires.
    Plan {
        /// Confidence demanded of the claim, strictly between 0 and 1.
        #[arg(long)]
        confidence: f64,
        /// Reliability to demonstrate, strictly between 0 and 1.
        #[arg(long)]
        reliability: f64,
    },
    /// Certify a prediction log: operating threshold plus TNR at each
    /// hysteresis age.
    Certify {
        /// Prediction log CSV: sample_id,actual_age,estimate[,tags].
        log: PathBuf,
        /// Confidence of a planning target to assess the positive set
        /// against; requires --target-reliability.
        #[arg(long, requires = "target_reliability")]
        target_confidence: Option<f64>,
        /// Reliability of the planning target; requires --target-confidence.
        #[arg(long, requires = "target_confidence")]
        target_reliability: Option<f64>,
        /// Name of the positive set in the report.
        #[arg(long, default_value = "positives")]
        set_name: String,
    },
    /// Sample a nested hierarchy from the log's positives and certify
    /// every level.
    Hierarchy {
        /// Prediction log CSV: sample_id,actual_age,estimate[,tags].
        log: PathBuf,
        /// Level sizes, ascending, e.g. 60,200,600,1550.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        sizes: Vec<usize>,
    },
    /// Generate synthetic datasets and certify them.
    Simulate {
        #[arg(long, default_value_t = 10)]
        per_year_positive: u32,
        #[arg(long, default_value_t = 100)]
        per_year_negative: u32,
        /// Standard deviation of the Gaussian estimate noise, in years.
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
        /// Mean of the estimate noise (a systematic bias), in years.
        #[arg(long, default_value_t = 0.0)]
        mean: f64,
        /// Positive ages, inclusive.
        #[arg(long, default_value = "12..17")]
        years: YearRange,
        /// Negative ages, inclusive.
        #[arg(long, default_value = "18..50")]
        negative_years: YearRange,
        /// Write the generated dataset to this file instead of certifying.
        #[arg(long, conflicts_with = "table1")]
        emit_csv: Option<PathBuf>,
        /// Certify the three standard designs sized for 95% confidence of
        /// 95%, 99.5%, and 99.8% reliability.
        #[arg(long)]
        table1: bool,
    },
    /// Mine a log for clerical suspects, hard examples, and attack tags.
    Diagnose {
        /// Prediction log CSV: sample_id,actual_age,estimate[,tags].
        log: PathBuf,
        /// Minimum |estimate - actual age| to flag as a clerical suspect.
        #[arg(long, default_value_t = 20.0)]
        gap: f64,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        match error {
            Error::EmptyPositives => Self {
                code: EXIT_NO_POSITIVES,
                message: "no positive samples (actual age below the legal age) in the input"
                    .to_string(),
            },
            other => Self::usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    validate_config(&cli.config)?;
    let output = dispatch(&cli.command, &cli.config)?;
    match &cli.config.out {
        Some(path) => fs::write(path, &output).map_err(|e| {
            CliError::usage(format!("cannot write {}: {e}", path.display()))
        })?,
        None => print!("{output}"),
    }
    Ok(())
}

fn validate_config(config: &Config) -> Result<(), CliError> {
    if !config.legal_age.is_finite() || config.legal_age <= 0.0 {
        return Err(CliError::usage(format!(
            "--legal-age must be a positive age, got {}",
            config.legal_age
        )));
    }
    for pair in config.hysteresis.windows(2) {
        if pair[0] >= pair[1] {
            return Err(CliError::usage(format!(
                "--hysteresis ages must be strictly ascending, got {} before {}",
                pair[0], pair[1]
            )));
        }
    }
    if let Some(&first) = config.hysteresis.first() {
        if first < config.legal_age {
            return Err(CliError::usage(format!(
                "--hysteresis ages must be at least the legal age {}, got {first}",
                config.legal_age
            )));
        }
    }
    Ok(())
}

fn dispatch(command: &Command, config: &Config) -> Result<String, CliError> {
    let doc = match command {
        Command::Plan {
            confidence,
            reliability,
        } => {
            let target =
                target_from(*confidence, *reliability, "--confidence", "--reliability")?;
            ReportDoc::Plan(report::plan_report(&target)?)
        }
        Command::Certify {
            log,
            target_confidence,
            target_reliability,
            set_name,
        } => {
            let samples = load_samples(log, config)?;
            let target = match (target_confidence, target_reliability) {
                (Some(c), Some(r)) => Some(target_from(
                    *c,
                    *r,
                    "--target-confidence",
                    "--target-reliability",
                )?),
                _ => None,
            };
            let fingerprint = ingest::dataset_fingerprint(&samples);
            let (positives, negatives) =
                ingest::split_by_legal_age(&samples, config.legal_age);
            ReportDoc::Certification(report::certify(
                &positives,
                &negatives,
                &config.hysteresis,
                target.as_ref(),
                set_name,
                Provenance::now(Some(fingerprint), None),
            )?)
        }
        Command::Hierarchy { log, sizes } => {
            let samples = load_samples(log, config)?;
            let fingerprint = ingest::dataset_fingerprint(&samples);
            let pool: Vec<Sample> = samples
                .iter()
                .filter(|s| s.actual_age < config.legal_age)
                .cloned()
                .collect();
            let hierarchy =
                testsets::build_hierarchy(&pool, sizes, config.seed, config.legal_age)?;
            let (_, negatives) = ingest::split_by_legal_age(&samples, config.legal_age);
            ReportDoc::Hierarchy(report::certify_hierarchy(
                &hierarchy,
                &negatives,
                &config.hysteresis,
                Provenance::now(Some(fingerprint), Some(config.seed)),
            )?)
        }
        Command::Simulate {
            per_year_positive,
            per_year_negative,
            sigma,
            mean,
            years,
            negative_years,
            emit_csv,
            table1,
        } => {
            let template = SyntheticDesign {
                positive_years: *years,
                negative_years: *negative_years,
                per_year_positive: *per_year_positive,
                per_year_negative: *per_year_negative,
                noise_sigma: *sigma,
                noise_mean: *mean,
                seed: config.seed,
            };
            if let Some(path) = emit_csv {
                let samples = synth::generate(&template)?;
                fs::write(path, ingest::write_prediction_log(&samples)).map_err(|e| {
                    CliError::usage(format!("cannot write {}: {e}", path.display()))
                })?;
                eprintln!("wrote {} samples to {}", samples.len(), path.display());
                return Ok(String::new());
            }
            let entries = if *table1 {
                let designs = synth::standard_designs(&template, config.seed)?;
                let rows = synth::run_table1_experiment(
                    &designs.iter().map(|(_, d)| d.clone()).collect::<Vec<_>>(),
                    &config.hysteresis,
                )?;
                designs
                    .into_iter()
                    .zip(rows)
                    .map(|((target, _), row)| (Some(target), row))
                    .collect()
            } else {
                let rows = synth::run_table1_experiment(
                    std::slice::from_ref(&template),
                    &config.hysteresis,
                )?;
                rows.into_iter().map(|row| (None, row)).collect::<Vec<_>>()
            };
            ReportDoc::Experiment(report::experiment_report(&entries)?)
        }
        Command::Diagnose { log, gap } => {
            let samples = load_samples(log, config)?;
            ReportDoc::Diagnostics(report::diagnostics_report(
                &samples,
                *gap,
                config.legal_age,
                &config.hysteresis,
            )?)
        }
    };
    Ok(report::render(&doc, config.format.into()))
}

fn target_from(
    confidence: f64,
    reliability: f64,
    confidence_flag: &str,
    reliability_flag: &str,
) -> Result<ReliabilityTarget, CliError> {
    ReliabilityTarget::new(confidence, reliability).map_err(|e| match e {
        Error::ProbabilityOutOfRange { name, value } => {
            let flag = if name == "confidence" {
                confidence_flag
            } else {
                reliability_flag
            };
            CliError::usage(format!(
                "{flag} must lie strictly between 0 and 1, got {value}"
            ))
        }
        other => other.into(),
    })
}

fn load_samples(path: &Path, config: &Config) -> Result<Vec<Sample>, CliError> {
    let raw = fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mode = if config.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };
    let outcome = ingest::parse_prediction_log(raw.as_slice(), mode)?;
    for row in &outcome.skipped {
        eprintln!("warning: skipped {row}");
    }
    Ok(outcome.samples)
}
