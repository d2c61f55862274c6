use std::path::Path;
use std::process::{Command, Output};

use polysketch::sketches::{Family, Field};
use polysketch::theory::variance_report;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polysketch"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_input(dir: &Path) {
    std::fs::write(dir.join("in.csv"), "0.1,0.2,0.3\n0.4,-0.5,0.6\n-0.7,0.8,0.9\n").unwrap();
}

fn sketch_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["sketch", "--input", "in.csv", "--family", "gaussian", "--degree", "2", "--dim", "4"];
    v.extend_from_slice(extra);
    v
}

#[test]
fn sketch_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    let o = run(&sketch_args(&["--out", "f.csv"]), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert!(text.starts_with('#'));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 4);
    assert_eq!(data[0].split(',').count(), 3);
}

#[test]
fn existing_output_is_refused_without_force() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    std::fs::write(dir.path().join("f.csv"), "keep").unwrap();
    let o = run(&sketch_args(&["--out", "f.csv"]), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: code=2 kind="));
    assert_eq!(std::fs::read_to_string(dir.path().join("f.csv")).unwrap(), "keep");

    let o = run(&sketch_args(&["--out", "f.csv", "--force"]), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_ne!(std::fs::read_to_string(dir.path().join("f.csv")).unwrap(), "keep");
}

#[test]
fn odd_dimension_for_ctr_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path());
    let o = run(
        &["sketch", "--input", "in.csv", "--family", "gaussian", "--field", "ctr", "--degree", "2", "--dim", "5", "--out", "f.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("D must be even for ctr"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn zero_degree_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["variance", "--family", "gaussian", "--degree", "0", "--dim", "4", "--x", "1,0", "--y", "0,1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("in.csv"), "1,2\n3,oops\n").unwrap();
    let o = run(&sketch_args(&["--out", "f.csv"]), dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("kind="));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&sketch_args(&["--out", "f.csv"]), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["sketch"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"], dir.path()).status.code(), Some(2));
}

#[test]
fn variance_json_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["variance", "--family", "rademacher", "--field", "ctr", "--degree", "3", "--dim", "8", "--x", "0.3,-0.1,0.7", "--y", "0.2,0.5,-0.4"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let got: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let report = variance_report(Family::Rademacher, Field::Ctr, &[0.3, -0.1, 0.7], &[0.2, 0.5, -0.4], 3, 8).unwrap();
    assert_eq!(got, serde_json::to_value(&report).unwrap());
    assert_eq!(got["D"], 8);
}

#[test]
fn variance_table_json_parses() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["variance-table", "--degree", "2", "--dim", "8", "--x", "0.3,-0.1", "--y", "0.2,0.5", "--json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_array() || v.is_object());
}

#[test]
fn empty_grid_succeeds_with_no_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.toml"), "metric = \"norm_error\"\nmethods = []\n").unwrap();
    let o = run(&["experiment", "--config", "e.toml", "--out", "r.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap(), "");
}

#[test]
fn two_cell_experiment_emits_two_lines() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("e.toml"),
        "metric = \"norm_error\"\ntrials = 50\nmethods = [{ family = \"gaussian\", field = \"real\" }, { family = \"product_srht\", field = \"ctr\" }]\ndegrees = [2]\ndims = [8]\nseeds = [3]\n[vector]\nkind = \"flat\"\nd = 4\n",
    )
    .unwrap();
    let o = run(&["experiment", "--config", "e.toml", "--out", "r.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    for l in &lines {
        assert_eq!(l["metric"], "norm_error");
        assert!(l["value"].as_f64().unwrap().is_finite());
    }
    assert!(dir.path().join("r.jsonl.aggregate.csv").exists());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.toml"), "metric = \"norm_error\"\nbogus = 1\n").unwrap();
    let o = run(&["experiment", "--config", "e.toml", "--out", "r.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}
