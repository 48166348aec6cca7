mod common;

use std::path::Path;
use std::process::{Command, Output};

use bodba_harness::cli::MetricsReport;
use common::{halfspace_config, write_config, FAST_BO};

fn attack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attack")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fast_config(dir: &Path) -> std::path::PathBuf {
    let text = halfspace_config("bo", 60, &[0, 1], 1, FAST_BO);
    write_config(dir, "exp.toml", &text)
}

#[test]
fn run_then_summarize_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fast_config(dir.path());
    let out = dir.path().join("results");
    let o = attack(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("budget,median,q1,q3,n\n60,"));
    assert!(csv.trim_end().ends_with(",1"));
    assert!(out.join("traces/task0_seed9.jsonl").exists());

    let pattern = format!("{}/traces/*.jsonl", out.display());
    let summary_dir = dir.path().join("summary");
    let o = attack(&[
        "summarize",
        "--traces",
        &pattern,
        "--budgets",
        "20,60",
        "--out-dir",
        summary_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(std::fs::read_to_string(summary_dir.join("summary.csv")).unwrap(), stdout(&o));

    let manifest = out.join("results.json");
    let o = attack(&["metrics", "--results", manifest.to_str().unwrap(), "--threshold", "1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: MetricsReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((report.runs, report.found), (1, 1));
    // a uniform direction reaches the boundary of a 16x16 margin-2 halfspace at L∞ 0.125
    assert_eq!(report.asr, 1.0);
    let linf = report.linf.unwrap().median;
    assert!((0.125 - 1e-9..1.0).contains(&linf), "{linf}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let bad = write_config(dir.path(), "bad.toml", "attack = \"bo\"\nbudgt = 3\n");
    assert_eq!(attack(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let zero = halfspace_config("bo", 0, &[0], 1, "");
    let zero = write_config(dir.path(), "zero.toml", &zero);
    assert_eq!(attack(&["run", "--config", zero.to_str().unwrap()]).status.code(), Some(2));

    let missing = dir.path().join("absent.toml");
    assert_eq!(attack(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(3));

    let corrupt = write_config(dir.path(), "t.jsonl", "not json\n");
    let o = attack(&["summarize", "--traces", corrupt.to_str().unwrap(), "--budgets", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let none = format!("{}/nothing/*.jsonl", dir.path().display());
    assert_eq!(attack(&["summarize", "--traces", &none, "--budgets", "10"]).status.code(), Some(1));

    let o = attack(&["metrics", "--results", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn uar_over_constant_dataset() {
    let dir = tempfile::tempdir().unwrap();
    // unit normal (0.5, 0.5, 0.5, 0.5): the boundary sits at mean pixel 0.5
    let oracle = write_config(
        dir.path(),
        "oracle.toml",
        "[image]\nheight = 2\nwidth = 2\nchannels = 1\n\n[oracle]\nkind = \"halfspace\"\noffset = 1.0\n",
    );
    let samples: Vec<String> = [0.40, 0.45, 0.47, 0.49, 0.3]
        .iter()
        .map(|v| format!("{{\"values\": [{v}, {v}, {v}, {v}], \"label\": 0}}"))
        .collect();
    let dataset = dir.path().join("data.json");
    std::fs::write(
        &dataset,
        format!(
            "{{\"shape\": {{\"height\": 2, \"width\": 2, \"channels\": 1}}, \"samples\": [{}]}}",
            samples.join(", ")
        ),
    )
    .unwrap();
    // every grid value at +1, scaled down to ε = 0.06
    let all_ones = format!("nearest:{}", vec!["1.0"; 48].join(","));
    let o = attack(&[
        "uar",
        "--generator",
        &all_ones,
        "--dataset",
        dataset.to_str().unwrap(),
        "--oracle",
        oracle.to_str().unwrap(),
        "--epsilon",
        "0.06",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["total"], 5);
    assert_eq!(report["misclassified"], 3);
    assert_eq!(report["rate"], 0.6);

    let o = attack(&[
        "uar",
        "--generator",
        "nearest:1.0,0.5",
        "--dataset",
        dataset.to_str().unwrap(),
        "--oracle",
        oracle.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
