//! End-to-end tests of the binary: exit codes, JSON/CSV shapes, and the
//! gen -> run round trip.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mechsched"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

#[test]
fn gen_run_round_trip_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let pred = dir.path().join("pred.json");
    let out = run(&[
        "gen",
        "--family",
        "perturbed",
        "--n",
        "3",
        "--m",
        "4",
        "--seed",
        "5",
        "--eta",
        "2",
        "--output",
        inst.to_str().unwrap(),
        "--prediction-output",
        pred.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&[
        "run",
        "--mechanism",
        "scaled-greedy",
        "--gamma",
        "1",
        "--instance",
        inst.to_str().unwrap(),
        "--prediction",
        pred.to_str().unwrap(),
        "--payments",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let record: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(record["mechanism"], "scaled-greedy");
    assert_eq!(record["violated"], false);
    assert!(record["payments"].is_array());
    assert!(record["digests"]["instance"].is_string());
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = run(&[
            "gen",
            "--family",
            "uniform",
            "--n",
            "3",
            "--m",
            "5",
            "--seed",
            "42",
            "--output",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn follow_prediction_on_adversarial_pair_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let pred = dir.path().join("pred.json");
    let out = run(&[
        "gen",
        "--family",
        "figure1",
        "--k",
        "100",
        "--eps",
        "0.01",
        "--output",
        inst.to_str().unwrap(),
        "--prediction-output",
        pred.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&[
        "run",
        "--mechanism",
        "follow-prediction",
        "--instance",
        inst.to_str().unwrap(),
        "--prediction",
        pred.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let record: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(record["violated"], true);
}

#[test]
fn misuse_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    write(&inst, r#"{"n":2,"m":1,"p":[[1.0],[2.0]]}"#);

    // Unknown mechanism.
    let out = run(&[
        "run",
        "--mechanism",
        "nope",
        "--instance",
        inst.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Missing gamma for a mechanism that needs it.
    let pred = dir.path().join("pred.json");
    write(&pred, r#"{"n":2,"m":1,"p":[[1.0],[2.0]]}"#);
    let out = run(&[
        "run",
        "--mechanism",
        "scaled-greedy",
        "--instance",
        inst.to_str().unwrap(),
        "--prediction",
        pred.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Unknown flag (usage error).
    let out = run(&["run", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));

    // Zero trials.
    let out = run(&[
        "verify",
        "--suite",
        "consistency",
        "--mechanism",
        "greedy",
        "--trials",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inf_entries_parse_case_insensitively() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    write(&inst, r#"{"n":2,"m":2,"p":[[1.0,"INF"],["inf",2.0]]}"#);
    let out = run(&[
        "run",
        "--mechanism",
        "greedy",
        "--instance",
        inst.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let record: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(record["allocation"], serde_json::json!([0, 1]));
}

#[test]
fn verify_emits_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = bin()
        .args([
            "verify",
            "--suite",
            "consistency",
            "--mechanism",
            "scaled-greedy",
            "--gamma",
            "1",
            "--trials",
            "50",
            "--seed",
            "3",
            "--output",
            report.to_str().unwrap(),
        ])
        .env("MECHSCHED_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mechanism,n,m,gamma,eta_bar,eta,trials,max_ratio,bound,violations"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("scaled-greedy,4,6,1,"), "row: {row}");
    assert!(row.ends_with(",0"), "row: {row}");

    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["consistency"]["violations"], 0);
}

#[test]
fn broken_fixtures_are_detected() {
    let out = run(&[
        "verify",
        "--suite",
        "monotonicity",
        "--mechanism",
        "broken-max-reporter",
        "--trials",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&[
        "verify",
        "--suite",
        "strategyproof",
        "--mechanism",
        "broken-first-price",
        "--trials",
        "50",
        "--seed",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn verify_is_thread_count_independent() {
    let csv = |threads: &str| {
        let out = bin()
            .args([
                "verify",
                "--suite",
                "robustness",
                "--mechanism",
                "simple-scaled-greedy",
                "--trials",
                "40",
                "--seed",
                "9",
            ])
            .env("MECHSCHED_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        stdout(&out)
    };
    assert_eq!(csv("1"), csv("4"));
}

#[test]
fn bench_prints_timing_csv() {
    let out = run(&[
        "bench",
        "--mechanism",
        "greedy",
        "--n",
        "3",
        "--m",
        "5",
        "--trials",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("mechanism,n,m,trials,total_ms,mean_ms"));
}
