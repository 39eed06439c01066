use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lsh_itables::data::{synth_planted, write_csv};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lsh-itables"));
    cmd.env_remove("LSH_ITABLES_RESULTS_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn fixture(dir: &Path) -> PathBuf {
    let path = dir.join("planted.csv");
    write_csv(&synth_planted(180, 12, 4, 5.0, 3).unwrap(), &path).unwrap();
    path
}

fn ledger_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn zero_runs_is_a_usage_error() {
    let out = run(&["eval", "--dataset", "x.csv", "--runs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_detector_is_a_usage_error() {
    let out = run(&["eval", "--dataset", "x.csv", "--detector", "loda"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["eval", "--dataset", "does-not-exist.csv", "--results-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn eval_appends_ledger_and_writes_scores() {
    let dir = TempDir::new().unwrap();
    let data = fixture(dir.path());
    let scores = dir.path().join("scores.csv");
    for detector in ["lsh-itables", "iforest"] {
        let out = bin()
            .args(["eval", "--detector", detector, "--m", "20", "--runs", "3", "--dataset"])
            .arg(&data)
            .arg("--scores")
            .arg(&scores)
            .env("LSH_ITABLES_RESULTS_DIR", dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let rows = ledger_rows(&dir.path().join("results.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "lsh-itables");
    assert_eq!(&rows[1][0], "iforest");
    assert_eq!(&rows[0][2], "3");
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() > 0.9));

    let scores = csv::Reader::from_path(&scores).unwrap();
    let records: Vec<_> = scores.into_records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 192);
    assert!(records.iter().all(|r| &r[2] == "higher-is-outlier"));
}

#[test]
fn single_participant_collaboration_matches_eval() {
    let dir = TempDir::new().unwrap();
    let data = fixture(dir.path());
    let ledger = dir.path().join("ledger.csv");
    let common = ["--m", "25", "--runs", "2", "--seed", "9"];
    let eval = bin()
        .arg("eval")
        .args(common)
        .arg("--dataset")
        .arg(&data)
        .arg("--ledger")
        .arg(&ledger)
        .output()
        .unwrap();
    assert!(eval.status.success());
    let collab = bin()
        .args(["collab", "--k", "1"])
        .args(common)
        .arg("--dataset")
        .arg(&data)
        .arg("--ledger")
        .arg(&ledger)
        .output()
        .unwrap();
    assert!(collab.status.success(), "{}", String::from_utf8_lossy(&collab.stderr));
    let rows = ledger_rows(&ledger);
    assert_eq!(&rows[0][3], &rows[1][3], "AUC mean");
    assert_eq!(&rows[0][4], &rows[1][4], "AUC std");
}

#[test]
fn collab_writes_transcript_and_plot_data() {
    let dir = TempDir::new().unwrap();
    let data = fixture(dir.path());
    let transcript = dir.path().join("transcript.jsonl");
    let plot = dir.path().join("plot.csv");
    let out = bin()
        .args([
            "collab",
            "--k",
            "3",
            "--m",
            "10",
            "--runs",
            "2",
            "--epsilon-sweep",
            "0.5,inf",
            "--dataset",
        ])
        .arg(&data)
        .arg("--transcript")
        .arg(&transcript)
        .arg("--plot-data")
        .arg(&plot)
        .arg("--results-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("participant 2"));

    // One transcript per sweep point: setup + k·m histogram releases.
    for eps in ["0.5", "inf"] {
        let text = std::fs::read_to_string(dir.path().join(format!("transcript-eps{eps}.jsonl"))).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 1 + 3 * 10);
        assert_eq!(lines[0]["type"], "hash-spec");
        assert!(lines[1..].iter().all(|m| m["type"] == "histogram"));
    }

    let rows: Vec<_> = csv::Reader::from_path(&plot)
        .unwrap()
        .into_records()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "0.5");
    assert_eq!(&rows[1][0], "inf");
}

#[test]
fn collab_rejects_unmergeable_detector_and_oversized_k() {
    let dir = TempDir::new().unwrap();
    let data = fixture(dir.path());
    for extra in [["--detector", "iforest"], ["--k", "1000"]] {
        let out = bin()
            .arg("collab")
            .args(extra)
            .arg("--dataset")
            .arg(&data)
            .arg("--results-dir")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1), "{extra:?}");
    }
}

#[test]
fn bench_reports_every_detector() {
    let dir = TempDir::new().unwrap();
    let output = dir.path().join("bench.csv");
    let out = bin()
        .args(["bench", "--synthetic", "3000", "--m", "10", "--output"])
        .arg(&output)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<_> = csv::Reader::from_path(&output)
        .unwrap()
        .into_records()
        .map(|r| r.unwrap())
        .collect();
    let detectors: Vec<_> = rows.iter().map(|r| r[0].to_string()).collect();
    assert_eq!(detectors, ["lsh-itables", "rs-h", "iforest"]);
    assert!(rows
        .iter()
        .all(|r| &r[2] == "3000" && r[7].parse::<f64>().unwrap() >= 0.0));
}
