use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tilescan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilescan"))
        .args(args)
        .env_remove("TILESCAN_WORKERS")
        .output()
        .expect("spawn tilescan")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}")))
        .collect()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(tilescan(&["--help"]).status.code(), Some(0));
    assert_eq!(tilescan(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tilescan(&["ssb", "--query", "q99"]).status.code(), Some(1));
    assert_eq!(
        tilescan(&["bench", "join", "--probe", "2^10", "--ht-min", "1MB", "--ht-max", "8KB"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tilescan(&["model", "select", "--n", "2^20"]).status.code(),
        Some(1)
    );
}

#[test]
fn model_coproc_reference_numbers() {
    let o = tilescan(&[
        "model", "coproc", "--rows", "120e6", "--bc", "54e9", "--bp", "12.8e9", "--json",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["host_ms"].as_f64().unwrap() - 35.555).abs() < 0.01);
    assert!((v["coprocessor_ms"].as_f64().unwrap() - 150.0).abs() < 1e-9);
    assert_eq!(v["host_wins"], Value::Bool(true));
}

#[test]
fn model_select_on_cpu_profile() {
    let o = tilescan(&[
        "model",
        "select",
        "--n",
        "2^29",
        "--sigma",
        "0.5",
        "--profile",
        "table2-cpu.json",
        "--json",
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let ms = v["total_seconds"].as_f64().unwrap() * 1e3;
    assert!((ms - 60.04).abs() < 0.1, "{ms}");
}

#[test]
fn model_text_lists_terms() {
    let o = tilescan(&["model", "q21", "--profile", "table2-gpu"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for t in ["r1", "r2", "r3"] {
        assert!(text.contains(t), "{text}");
    }
}

#[test]
fn missing_profile_is_io_error() {
    let o = tilescan(&[
        "model",
        "project",
        "--n",
        "10",
        "--profile",
        "/nonexistent/x.json",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_select_single_point() {
    let o = tilescan(&[
        "bench",
        "select",
        "--n",
        "2^16",
        "--sel",
        "0.5",
        "--reps",
        "3",
        "--variant",
        "tile",
        "--model",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["rep_times_ms"].as_array().unwrap().len(), 3);
    assert!(lines[0]["mean_ms"].as_f64().unwrap() >= 0.0);
    assert!(lines[0]["model_ms"].as_f64().is_some());
}

#[test]
fn bench_join_one_line_per_size() {
    let o = tilescan(&[
        "bench",
        "join",
        "--probe",
        "2^12",
        "--ht-min",
        "8KB",
        "--ht-max",
        "64KB",
        "--variant",
        "scalar,tile",
        "--reps",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_lines(&o).len(), 4 * 2);
}

#[test]
fn bench_csv_has_header() {
    let o = tilescan(&[
        "bench", "sort", "--n", "2^12", "--algo", "lsb", "--reps", "1", "--csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("bench,"));
}

#[test]
fn deterministic_runs_have_identical_results() {
    let run = || {
        let o = tilescan(&[
            "bench",
            "select",
            "--n",
            "2^14",
            "--step",
            "0.25",
            "--reps",
            "1",
            "--seed",
            "7",
            "--workers",
            "3",
        ]);
        assert!(o.status.success());
        json_lines(&o)
            .into_iter()
            .map(|v| (v["params"].clone(), v["result"].clone()))
            .collect::<Vec<_>>()
    };
    let a = run();
    assert_eq!(a.len(), 5 * 3);
    assert_eq!(a, run());
}

#[test]
fn probe_feeds_model() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("probed.json");
    let p = profile.to_str().unwrap();
    let o = tilescan(&[
        "probe",
        "--buffer",
        "8MB",
        "--reps",
        "1",
        "--workers",
        "1",
        "--out",
        p,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = tilescan(&["model", "project", "--n", "2^20", "--profile", p, "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["total_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn gen_then_validate_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = tilescan(&["gen", "--sf", "1", "--seed", "3", "--out", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(d).join("manifest.json").is_file());

    let o = tilescan(&[
        "ssb",
        "--data",
        d,
        "--query",
        "q21",
        "--query",
        "q3.4",
        "--validate",
        "--reps",
        "1",
        "--compare-model",
        "--profile",
        "table2-gpu",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["model_ms"].as_f64().is_some());
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(
        err.lines().filter(|l| l.starts_with("PASS")).count(),
        2,
        "{err}"
    );

    std::fs::write(
        Path::new(d).join("lineorder").join("lo_revenue.col"),
        b"junk",
    )
    .unwrap();
    let o = tilescan(&["ssb", "--data", d, "--query", "q21"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn gen_into_unwritable_path() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, b"x").unwrap();
    let out = file.join("db");
    let o = tilescan(&["gen", "--sf", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
