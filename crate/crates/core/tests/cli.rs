use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opsys")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

#[test]
fn closure_on_diagonal_subalgebra() {
    let out = run(&[
        "check-closure",
        "--system",
        &fixture("diag2.json"),
        "--ambient",
        &fixture("m2.json"),
        "--assert",
        "0.05",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "check-closure");
    assert_eq!(r["seed"], 0xC5A1);
    assert_eq!(r["result"]["oracle"]["closed"], true);
    assert!(r["result"]["closure"]["defect"].as_f64().unwrap() <= 0.05);
    assert_eq!(r["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let malformed =
        run(&["check-closure", "--system", &fixture("malformed.json"), "--ambient", &fixture("m2.json")]);
    assert_eq!(malformed.status.code(), Some(2));
    let missing = run(&["decompose", "--matrix", &fixture("no_such_file.json")]);
    assert_eq!(missing.status.code(), Some(2));
    let not_inside =
        run(&["check-closure", "--system", &fixture("m3.json"), "--ambient", &fixture("m2.json")]);
    assert_eq!(not_inside.status.code(), Some(3));
    let not_algebra =
        run(&["check-closure", "--system", &fixture("diag2.json"), "--ambient", &fixture("offdiag2.json")]);
    assert_eq!(not_algebra.status.code(), Some(3));
    let bad_flag = run(&["walter", "--nope"]);
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn assert_threshold() {
    let args = |t: &'static str| {
        vec![
            "walter".to_string(),
            "--u".into(),
            fixture("one1.json"),
            "--v".into(),
            fixture("one1.json"),
            "--x".into(),
            fixture("minus_one1.json"),
            "--assert".into(),
            t.into(),
        ]
    };
    let run_owned = |a: Vec<String>| Command::new(env!("CARGO_BIN_EXE_opsys")).args(a).output().unwrap();
    let failing = run_owned(args("0.5"));
    assert_eq!(failing.status.code(), Some(1));
    let d = report(&failing)["result"]["dist_to_psd"].as_f64().unwrap();
    assert!((d - 1.0).abs() <= 1e-10);
    assert_eq!(run_owned(args("1.5")).status.code(), Some(0));
}

#[test]
fn out_flag_writes_report() {
    let path = std::env::temp_dir().join(format!("opsys-report-{}.json", std::process::id()));
    let out = run(&["detect-unitary", "--matrix", &fixture("flip2.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(r["result"]["is_unitary"], true);
}

#[test]
fn seed_changes_random_sections_only_when_used() {
    let a = report(&run(&["ucp-suite", "--samples", "30", "--seed", "1"]));
    let b = report(&run(&["ucp-suite", "--samples", "30", "--seed", "2"]));
    assert_ne!(a["result"], b["result"]);
    assert_eq!(a["config"]["rng_seed"], 1);
}

#[test]
fn eval_with_named_structure() {
    let out = run(&[
        "eval",
        "--sentence",
        &fixture("square_distance.json"),
        "--structure",
        &format!("A={}", fixture("diag2.json")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(r["result"]["value"].as_f64().unwrap() < 1e-9);
    // products need a C*-algebra structure
    let out = run(&[
        "eval",
        "--sentence",
        &fixture("square_distance.json"),
        "--structure",
        &format!("A={}", fixture("offdiag2.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["eval", "--sentence", &fixture("square_distance.json"), "--structure", "A"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_and_pisier_reports() {
    let r = report(&run(&["decompose", "--matrix", &fixture("contraction2.json")]));
    assert!(r["result"]["reconstruction_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["result"]["unitaries"].as_array().unwrap().len(), 4);
    let r = report(&run(&["pisier", "--map", &fixture("diag_expectation2.json")]));
    assert!(r["result"]["unitary_preservation_defect"].as_f64().unwrap() >= 0.99);
    assert_eq!(r["result"]["implication_holds"], true);
}
