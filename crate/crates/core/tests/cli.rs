use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use mblab::cli::Report;

fn mblab(args: &[&str]) -> Output {
    mblab_env(args, &[])
}

fn mblab_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mblab"));
    cmd.args(args).env_remove("MBLAB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn construct_reports_block_distances() {
    let out = mblab(&["construct", "--blocks", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&out);
    assert_eq!(report["mode"], "construct");
    assert_eq!(report["passed"], true);
    let items = report["items"].as_array().unwrap();
    assert_eq!(items.len(), 3);
    let d = items[0]["diagnostics"]["distance"].as_f64().unwrap();
    assert!((d - 1.5f64.sqrt()).abs() < 1e-12, "{d}");
}

#[test]
fn csv_output_is_deterministic() {
    let args = [
        "witness",
        "--targets",
        "2,3",
        "--permutation",
        "random",
        "--seed",
        "42",
        "--format",
        "csv",
    ];
    let a = mblab(&args);
    let b = mblab(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let c = mblab(&[
        "witness",
        "--targets",
        "2,3",
        "--permutation",
        "random",
        "--seed",
        "43",
        "--format",
        "csv",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn thread_count_does_not_change_results() {
    let args = [
        "sweep",
        "--axis",
        "c",
        "--values",
        "2",
        "--permutations",
        "6",
        "--seed",
        "3",
        "--format",
        "csv",
    ];
    let one = mblab_env(&args, &[("MBLAB_THREADS", "1")]);
    let four = mblab_env(&args, &[("MBLAB_THREADS", "4")]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, four.stdout);

    let bad = mblab_env(&args, &[("MBLAB_THREADS", "0")]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("MBLAB_THREADS"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"epsilon": {"kind": "power_law", "exponent": 2.0}, "dims": [8, 16], "seed": 1}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let out = mblab(&["verify", "--config", p]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["items"].as_array().unwrap().len(), 2);

    let out = mblab(&["verify", "--config", p, "--dims", "4,8,32"]);
    let report = json(&out);
    assert_eq!(report["items"].as_array().unwrap().len(), 3);
    assert_eq!(report["config"]["epsilon"]["kind"], "power_law");

    std::fs::write(&path, "{\"dims\": [4],\n \"dimz\": 3}").unwrap();
    let out = mblab(&["verify", "--config", p]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("dimz"), "{}", stderr(&out));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = mblab(&[
        "characters",
        "--ranks",
        "2",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(Path::new(&path)).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains(','));
    assert!(lines.count() >= 1);
}

#[test]
fn json_reports_round_trip_floats() {
    let out = mblab(&["oracle", "--epsilon", "list:0.3,0.4,0.5", "--dims", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let report = Report::from_json(&text).unwrap();
    assert_eq!(report.to_json().unwrap().trim(), text.trim());
    let value: Value = serde_json::from_str(&text).unwrap();
    let best = value["items"][0]["best"]["value"].as_f64().unwrap();
    assert_eq!(best.to_string().parse::<f64>().unwrap(), best);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = mblab(&["renorm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));

    let out = mblab(&["construct", "--epsilon", "constant:1.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = mblab(&["construct", "--epsilon", "wobbly:1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = mblab(&["nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn renorm_and_sweeps_pass() {
    let out = mblab(&["renorm", "--seed", "5", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["items"][0]["report"]["passed"], true);

    let out = mblab(&[
        "sweep",
        "--axis",
        "dim",
        "--values",
        "8,64",
        "--epsilon",
        "power:2",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);

    let out = mblab(&["sweep", "--axis", "m", "--values", "1,2,3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
