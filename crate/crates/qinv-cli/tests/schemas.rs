//! Validates every machine-readable CLI output against the JSON
//! schemas shipped in `schemas/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let text = fs::read_to_string(&path).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&doc).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn last_stdout_json(args: &[&str]) -> serde_json::Value {
    let out = Command::new(env!("CARGO_BIN_EXE_qinv")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.lines().last().expect("stdout line")).unwrap()
}

fn check(validator: &jsonschema::Validator, value: &serde_json::Value, what: &str) {
    let errors: Vec<String> =
        validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{what} violates its schema: {errors:?}\n{value}");
}

#[test]
fn synthesize_outputs_match_schemas() {
    let summary_schema = schema("synthesize-summary.schema.json");
    let trace_schema = schema("trace-event.schema.json");

    let trace = tmp("schema-trace.jsonl");
    let artifact = tmp("schema-artifact.json");
    let summary = last_stdout_json(&[
        "synthesize",
        corpus("geo.pgcl").to_str().unwrap(),
        corpus("geo.p1.prop").to_str().unwrap(),
        "--strategy",
        "dynamic",
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        artifact.to_str().unwrap(),
    ]);
    check(&summary_schema, &summary, "synthesize summary");
    assert_eq!(summary["outcome"], "invariant");

    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&artifact).unwrap()).unwrap();
    check(&summary_schema, &saved, "synthesize artifact");

    let lines = fs::read_to_string(&trace).unwrap();
    assert!(!lines.trim().is_empty());
    for line in lines.lines() {
        let event: serde_json::Value = serde_json::from_str(line).unwrap();
        check(&trace_schema, &event, "trace event");
    }

    // an exhausted summary exercises the other outcome branch
    let exhausted = last_stdout_json(&[
        "synthesize",
        corpus("brpintro.pgcl").to_str().unwrap(),
        corpus("brpintro.p2.prop").to_str().unwrap(),
        "--rounds",
        "1",
    ]);
    check(&summary_schema, &exhausted, "exhausted summary");
    assert_eq!(exhausted["outcome"], "exhausted");
}

#[test]
fn verify_output_matches_schema() {
    let verify_schema = schema("verify-report.schema.json");
    let good = tmp("schema-good-invariant.txt");
    fs::write(&good, "[c = 0]*(x + 1) + [!(c = 0)]*(x)").unwrap();
    let report = last_stdout_json(&[
        "verify",
        corpus("geo.pgcl").to_str().unwrap(),
        corpus("geo.p1.prop").to_str().unwrap(),
        good.to_str().unwrap(),
    ]);
    check(&verify_schema, &report, "verify report");
    assert_eq!(report["admissible"], true);

    // an inadmissible invariant exercises the counterexample branch
    let bad = tmp("schema-bad-invariant.txt");
    fs::write(&bad, "[c = 0]*(1/2) + [!(c = 0)]*(x)").unwrap();
    let report = last_stdout_json(&[
        "verify",
        corpus("geo.pgcl").to_str().unwrap(),
        corpus("geo.p1.prop").to_str().unwrap(),
        bad.to_str().unwrap(),
    ]);
    check(&verify_schema, &report, "verify report with counterexample");
    assert_eq!(report["admissible"], false);
}

#[test]
fn oracle_output_matches_schema() {
    let oracle_schema = schema("oracle-report.schema.json");
    let report = last_stdout_json(&[
        "oracle",
        corpus("gridsmall.pgcl").to_str().unwrap(),
        corpus("gridsmall.p1.prop").to_str().unwrap(),
    ]);
    check(&oracle_schema, &report, "oracle report");
    assert_eq!(report["value"], "1/2");
}
