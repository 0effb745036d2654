//! End-to-end tests of the installed binary: real process spawns, real
//! files, real exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../testdata/appa_validation_replica.csv"
);

fn zerofail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerofail"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(output)).expect("stdout is JSON")
}

/// Emits a synthetic prediction log and returns its path.
fn emit_log(dir: &tempfile::TempDir, seed: &str) -> PathBuf {
    let path = dir.path().join(format!("log-{seed}.csv"));
    let out = zerofail(&[
        "simulate",
        "--seed",
        seed,
        "--emit-csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

#[test]
fn plan_reports_the_canonical_sizes() {
    let out = zerofail(&["plan", "--confidence", "0.95", "--reliability", "0.995"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("597.6473 exact, 598 after ceiling"), "{text}");

    let out = zerofail(&[
        "plan",
        "--confidence",
        "0.90",
        "--reliability",
        "0.90",
        "--format",
        "json",
    ]);
    let value = json(&out);
    assert_eq!(value["schema"], "zerofail/1");
    assert_eq!(value["kind"], "plan");
    assert_eq!(value["required_ceiling"], 22);
    assert!((value["required_exact"].as_f64().unwrap() - 21.854345326782838).abs() < 1e-9);
}

#[test]
fn plan_rejects_out_of_range_probabilities() {
    let out = zerofail(&["plan", "--confidence", "1.0", "--reliability", "0.9"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--confidence"), "{}", stderr(&out));

    let out = zerofail(&["plan", "--confidence", "0.9", "--reliability", "0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--reliability"), "{}", stderr(&out));
}

#[test]
fn certify_synthetic_log_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let log = emit_log(&dir, "7");
    let out = zerofail(&[
        "certify",
        log.to_str().unwrap(),
        "--target-confidence",
        "0.95",
        "--target-reliability",
        "0.95",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let value = json(&out);
    assert_eq!(value["kind"], "certification");
    assert_eq!(value["positive_count"], 60);
    assert_eq!(value["negative_count"], 3300);
    let reports = value["tnr_reports"].as_array().unwrap();
    let ages: Vec<f64> = reports
        .iter()
        .map(|r| r["hysteresis_age"].as_f64().unwrap())
        .collect();
    assert_eq!(ages, vec![18.0, 25.0, 30.0]);
    assert!(reports[1]["tnr"].as_f64().unwrap() > reports[0]["tnr"].as_f64().unwrap());
    let assessment = &value["target_assessment"];
    assert_eq!(assessment["required_ceiling"], 59);
    assert_eq!(assessment["shortfall"], 0);
    assert!(value["provenance"]["dataset_fingerprint"]
        .as_str()
        .unwrap()
        .starts_with("sha256:"));
    assert!(value["provenance"]["seed"].is_null());

    let out = zerofail(&["certify", log.to_str().unwrap()]);
    let text = stdout(&out);
    assert!(text.contains("# Zero-failure certification: positives"), "{text}");
    assert!(text.contains("| hysteresis age | eligible | true negatives | TNR |"));
}

#[test]
fn certify_exits_three_without_positives() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("adults.csv");
    std::fs::write(
        &log,
        "sample_id,actual_age,estimate\na,30,29\nb,41,44.5\n",
    )
    .unwrap();
    let out = zerofail(&["certify", log.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(
        stderr(&out).contains("no positive samples"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn strict_parse_failures_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("broken.csv");
    std::fs::write(
        &log,
        "sample_id,actual_age,estimate\na,15,16\nb,fifteen,17\n",
    )
    .unwrap();
    let out = zerofail(&["certify", log.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = zerofail(&["certify", log.to_str().unwrap(), "--lenient"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("warning: skipped line 3"), "{}", stderr(&out));
    assert!(stdout(&out).contains("positive samples: 1"));
}

#[test]
fn hierarchy_certifies_each_level() {
    let dir = tempfile::tempdir().unwrap();
    let log = emit_log(&dir, "11");
    let out = zerofail(&[
        "hierarchy",
        log.to_str().unwrap(),
        "--sizes",
        "10,30,60",
        "--seed",
        "11",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let value = json(&out);
    assert_eq!(value["kind"], "hierarchy");
    assert_eq!(value["monotonicity_ok"], true);
    let levels = value["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 3);
    assert_eq!(levels[0]["set_name"], "level-1");
    assert_eq!(levels[2]["positive_count"], 60);
    let thresholds: Vec<f64> = levels
        .iter()
        .map(|l| l["operating_point"]["threshold"].as_f64().unwrap())
        .collect();
    assert!(thresholds[0] <= thresholds[1] && thresholds[1] <= thresholds[2]);
    assert_eq!(levels[0]["provenance"]["seed"], 11);
}

#[test]
fn hierarchy_rejects_oversized_levels() {
    let dir = tempfile::tempdir().unwrap();
    let log = emit_log(&dir, "3");
    let out = zerofail(&["hierarchy", log.to_str().unwrap(), "--sizes", "10,600"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("exceeds"), "{}", stderr(&out));
}

#[test]
fn simulate_table1_matches_canonical_sizes() {
    let out = zerofail(&["simulate", "--table1", "--seed", "0", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let value = json(&out);
    assert_eq!(value["kind"], "experiment");
    let rows = value["rows"].as_array().unwrap();
    let sizes: Vec<u64> = rows
        .iter()
        .map(|r| r["positive_count"].as_u64().unwrap())
        .collect();
    assert_eq!(sizes, vec![60, 600, 1500]);
    for row in rows {
        assert_eq!(row["negative_count"], 3300);
        assert_eq!(row["target_assessment"]["shortfall"], 0);
    }
    let seeds: Vec<u64> = rows
        .iter()
        .map(|r| r["provenance"]["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![0, 1, 2]);

    let out = zerofail(&["simulate", "--table1"]);
    let text = stdout(&out);
    assert!(text.contains("(0.95, 0.998)"), "{text}");
    // One header, one rule, three data rows.
    assert_eq!(text.lines().filter(|l| l.starts_with('|')).count(), 5);
}

#[test]
fn emitted_datasets_are_deterministic_and_reingestable() {
    let dir = tempfile::tempdir().unwrap();
    let first = emit_log(&dir, "42");
    let second = dir.path().join("again.csv");
    let out = zerofail(&["simulate", "--seed", "42", "--emit-csv", second.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
    let lines = std::fs::read_to_string(&first).unwrap().lines().count();
    // Header plus 60 positives plus 3300 negatives.
    assert_eq!(lines, 3361);

    let out = zerofail(&["certify", first.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("set_name,"), "{text}");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn bare_simulate_certifies_one_design() {
    let out = zerofail(&[
        "simulate",
        "--per-year-positive",
        "3",
        "--years",
        "15..15",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let value = json(&out);
    let rows = value["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["positive_count"], 3);
    assert!(rows[0]["target_assessment"].is_null());
}

#[test]
fn diagnose_finds_fixture_anomalies() {
    let out = zerofail(&["diagnose", FIXTURE, "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let value = json(&out);
    assert_eq!(value["kind"], "diagnostics");
    let suspects = value["clerical_suspects"].as_array().unwrap();
    assert_eq!(suspects.len(), 1);
    assert_eq!(suspects[0]["sample_id"], "v001");
    let groups = value["hard_examples"].as_array().unwrap();
    let at_25 = groups
        .iter()
        .find(|g| g["hysteresis_age"] == 25.0)
        .expect("group at 25");
    assert_eq!(at_25["flags"].as_array().unwrap().len(), 9);
    assert!(value["attack_tagged"].as_array().unwrap().is_empty());

    let out = zerofail(&["diagnose", FIXTURE, "--hysteresis", "29", "--format", "json"]);
    let value = json(&out);
    let groups = value["hard_examples"].as_array().unwrap();
    assert_eq!(groups.len(), 1);
    let flags = groups[0]["flags"].as_array().unwrap();
    assert_eq!(flags.len(), 1);
    assert_eq!(flags[0]["sample_id"], "v001");
}

#[test]
fn config_validation_rejects_bad_hysteresis() {
    let out = zerofail(&["diagnose", FIXTURE, "--hysteresis", "30,25"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("ascending"), "{}", stderr(&out));

    let out = zerofail(&["diagnose", FIXTURE, "--hysteresis", "12,25"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("legal age"), "{}", stderr(&out));
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.md");
    let out = zerofail(&[
        "plan",
        "--confidence",
        "0.95",
        "--reliability",
        "0.95",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.contains("# Test-size plan"));
    assert!(written.contains("58.4040 exact, 59 after ceiling"));
}
