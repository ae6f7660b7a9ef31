//! End-to-end runs of the `cantor-shrink` binary.

use std::process::{Command, Output};

use cantor_shrink::dimension::{bowen_parameter, dimension_limsup, DEFAULT_TOL};
use cantor_shrink::{CumulativeCache, Target};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cantor-shrink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn records(args: &[&str]) -> Vec<Value> {
    stdout(args)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is one JSON object"))
        .collect()
}

#[test]
fn expand_reports_digits_and_remainder() {
    let r = &records(&["expand", "--q", "periodic:2,3", "--x", "5/6", "--n", "2"])[0];
    assert_eq!(r["digits"], serde_json::json!([1, 2]));
    assert_eq!(r["remainder"], "0");
}

#[test]
fn decimal_points_are_exact() {
    let r = &records(&["iterate", "--q", "const:10", "--x", "0.125", "--n", "1"])[0];
    assert_eq!(r["x"], "1/8");
    assert_eq!(r["value"], "1/4");
}

#[test]
fn zero_weight_dimension_is_exactly_one() {
    let r = &records(&["dimension", "--q", "expr:n+1", "--alpha", "const:0", "--n-max", "100"])[0];
    assert_eq!(r["value"].as_f64(), Some(1.0));
    assert_eq!(r["method"], "closed_form_limsup");
}

#[test]
fn exponential_family_dimension_is_one_half() {
    let r = &records(&[
        "dimension", "--q", "expr:2^n", "--alpha", "expr:0.693147*n", "--n-max", "2000",
    ])[0];
    assert!((r["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(r["residual"].as_f64().is_some());
}

#[test]
fn output_matches_library_calls() {
    let args = ["--q", "periodic:2,3", "--alpha", "expr:log(n+1)", "--n-max", "500"];
    let mut q = CumulativeCache::parse("periodic:2,3", Target::Base).unwrap();
    let mut a = CumulativeCache::parse("expr:log(n+1)", Target::Weight).unwrap();
    let lib = dimension_limsup(&mut q, &mut a, 500, 0.5).unwrap();
    let cli = &records(&[&["dimension"][..], &args].concat())[0];
    assert_eq!(cli["value"].as_f64(), Some(lib.value));
    assert_eq!(cli["residual"].as_f64(), Some(lib.residual));
    let lib = bowen_parameter(&mut q, &mut a, 500, DEFAULT_TOL, 0.5).unwrap();
    let cli = &records(&[&["bowen"][..], &args].concat())[0];
    assert_eq!(cli["value"].as_f64(), Some(lib.value));
}

#[test]
fn output_is_deterministic() {
    let args = [
        "cover-check", "--q", "const:2", "--alpha", "const:1", "--s", "0.3", "--levels", "2",
        "--log-c", "6.3", "--samples", "20", "--radii", "5",
    ];
    assert_eq!(stdout(&args), stdout(&args));
}

#[test]
fn csv_and_json_carry_the_same_values() {
    let base = ["pressure", "--q", "const:2", "--alpha", "const:1", "--s", "0.3", "--n-max", "40", "--profile"];
    let json = records(&base);
    let csv_text = stdout(&[&base[..], &["--format", "csv"]].concat());
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["n", "value"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), json.len());
    for (row, rec) in rows.iter().zip(&json) {
        assert_eq!(row[0].parse::<u64>().unwrap(), rec["n"].as_u64().unwrap());
        assert_eq!(row[1].parse::<f64>().unwrap(), rec["value"].as_f64().unwrap());
    }
    // f_n(s) = (1 - s) log 2 - s for a constant pair.
    let expect = 0.7 * std::f64::consts::LN_2 - 0.3;
    for rec in &json {
        assert!((rec["value"].as_f64().unwrap() - expect).abs() < 1e-14);
    }
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hits.jsonl");
    let printed = stdout(&[
        "hits", "--q", "periodic:2,3", "--alpha", "const:1", "--x", "1/7", "--n-max", "6",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(printed.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    let levels: Vec<u64> = written
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["n"].as_u64().unwrap())
        .collect();
    assert_eq!(levels.first(), Some(&1));
}

#[test]
fn tree_export_has_versioned_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.tsv");
    let r = &records(&[
        "cover-build", "--q", "const:2", "--alpha", "const:1", "--s", "0.3", "--levels", "1,5",
        "--tree-out", path.to_str().unwrap(),
    ])[0];
    assert_eq!(r["levels"], serde_json::json!([1, 5]));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# cantor-shrink cover tree v1"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header.split('\t').count(), 7);
    let nodes = r["nodes"].as_array().unwrap();
    let total: u64 = nodes.iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count() as u64, total + 1);
}

#[test]
fn family_can_be_inferred() {
    let given = &records(&["family", "--family", "periodic:2,3;c=1"])[0];
    let inferred = &records(&["family", "--q", "periodic:2,3", "--alpha", "const:1"])[0];
    assert_eq!(given["value"], inferred["value"]);
    let expect = 6f64.ln() / (6f64.ln() + 2.0);
    assert!((given["value"].as_f64().unwrap() - expect).abs() < 1e-15);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["dimension", "--q", "const:1", "--alpha", "const:1", "--n-max", "100"][..],
        &["dimension", "--q", "const:2", "--alpha", "const:-1", "--n-max", "100"],
        &["pressure", "--q", "const:2", "--alpha", "const:1", "--s", "0.3", "--n-max", "5"],
        &["expand", "--q", "const:2", "--x", "1/0", "--n", "3"],
        &["frobnicate"],
        &["hits", "--q", "const:2", "--alpha", "const:1", "--x", "1/3"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn computation_errors_exit_two() {
    let out = run(&["height", "--q", "const:2", "--x", "1/3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not Q-adic"));
    let out = run(&[
        "series-check", "--q", "const:2", "--alpha", "const:0", "--t", "0.5", "--n-max", "100",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn no_limit_is_a_flag_not_an_error() {
    let r = &records(&["corollary", "--q", "periodic:2,3", "--alpha", "const:1", "--n-max", "1000"])[0];
    assert_eq!(r["flag"], "no_limit");
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "expand", "iterate", "hits", "height", "witness", "pressure", "bowen", "dimension",
        "corollary", "family", "cover-build", "cover-check", "hsum", "series-check", "stolz",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}
