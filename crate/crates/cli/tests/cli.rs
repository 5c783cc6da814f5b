use std::process::Command;

use serde_json::Value;

fn dioph(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dioph")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn jsonl(s: &str) -> Vec<Value> {
    s.lines().map(|l| serde_json::from_str(l).expect("json line")).collect()
}

#[test]
fn one_third_has_two_records() {
    let (code, out, err) = dioph(&["bestapprox", "--theta", "1/3", "--decomp", "1|1", "--def", "norm", "--qmax", "100"]);
    assert_eq!(code, 0, "{err}");
    let lines = jsonl(&out);
    assert_eq!(lines[0]["version"], dioph_cli::VERSION);
    assert_eq!(lines[0]["config"]["theta"], "1/3");
    let q: Vec<&str> = lines[1..].iter().map(|r| r["q"][0].as_str().unwrap()).collect();
    assert_eq!(q, vec!["1", "3"]);
}

#[test]
fn one_fifth_one_seventh_separates_definitions() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("theta.txt");
    std::fs::write(&file, "1/5 1/7\n").unwrap();
    let file = file.to_str().unwrap();
    let has = |def: &str| {
        let (code, out, err) = dioph(&["bestapprox", "--theta-file", file, "--decomp", "2|1", "--def", def, "--qmax", "40"]);
        assert_eq!(code, 0, "{err}");
        jsonl(&out)[1..].iter().any(|r| r["p"] == serde_json::json!(["-1", "-1"]) && r["q"] == serde_json::json!(["5"]))
    };
    assert!(has("cuboid"));
    assert!(!has("norm"));
}

#[test]
fn selfcheck_passes_and_flag_is_accepted() {
    let (code, out, err) = dioph(&["selfcheck", "--samples", "3", "--seed", "9"]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("0 mismatches"));
    let (code, _, err) = dioph(&["bestapprox", "--theta", "2/7", "--qmax", "1000", "--selfcheck"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("oracle agrees"));
}

#[test]
fn cross_section_reports_exact_match() {
    let (code, out, err) = dioph(&["cross-section", "--theta", "2/7", "--T", "3", "--verify"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("match: exact"));
}

#[test]
fn parse_errors_exit_with_one() {
    let (code, _, _) = dioph(&["bestapprox", "--theta", "x/y", "--qmax", "10"]);
    assert_eq!(code, 1);
    let (code, _, _) = dioph(&["count", "--constraint", "shortest=0:1", "--samples", "1", "--length", "10"]);
    assert_eq!(code, 1);
}

#[test]
fn precision_exhaustion_exits_with_two() {
    let (code, _, err) = dioph(&["bestapprox", "--decomp", "1|1", "--digits", "20", "--set", "cap=20", "--length", "200"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# golden ratio\nmeasure=quadratic\ncoefficients=1,1,-1\nbits=600\nlength=50\nsamples=1\nformat=csv\n").unwrap();
    let (code, out, err) = dioph(&["levy", "--config", cfg.to_str().unwrap(), "--length", "200"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("# {"));
    assert!(out.contains("\"length\":\"200\""));
    let mean: f64 = out
        .lines()
        .find(|l| l.starts_with("levy_mean,"))
        .and_then(|l| l.split(',').nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!((mean - 0.4812).abs() < 0.01, "{mean}");
}

#[test]
fn levy_run_reports_check_against_tolerance() {
    let (code, out, err) = dioph(&[
        "levy", "--measure", "lebesgue", "--samples", "8", "--length", "1500", "--seed", "3", "--expect", "1.186569", "--tol", "0.05",
        "--workers", "2",
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = jsonl(&out);
    let check = rows.iter().find(|r| r["estimator"] == "check").unwrap();
    assert!(check["value"].as_str().unwrap().starts_with("pass"), "{check}");
}

#[test]
fn outputs_are_reproducible_from_the_header() {
    let args = ["residues", "--samples", "3", "--length", "300", "--seed", "5", "--mod", "3"];
    let (_, a, _) = dioph(&args);
    let (_, b, _) = dioph(&args);
    assert_eq!(a, b);
    let rows = jsonl(&a);
    assert!(rows.iter().all(|r| r["key"] != "0;0"));
}

#[test]
fn record_streams_reingest_to_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("records.jsonl");
    let stream = stream.to_str().unwrap();
    let (code, _, err) = dioph(&["bestapprox", "--decomp", "2|1", "--norms", "e|s", "--def", "norm", "--digits", "200", "--seed", "4", "--length", "60", "--out", stream]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = dioph(&["determinants", "--records", stream, "--format", "csv"]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(stream).unwrap();
    let (space, run) = dioph_cli::read_records(&text).unwrap();
    let table = dioph::stats::determinant_distribution(&run.records, &space);
    let total: u64 = table.values().sum();
    assert_eq!(total as usize, run.records.len() - 2);
    for (value, count) in table {
        let row = format!("determinant,{value},{}", count as f64 / total as f64);
        assert!(out.lines().any(|l| l.starts_with(&row)), "{row} missing from\n{out}");
    }
}
