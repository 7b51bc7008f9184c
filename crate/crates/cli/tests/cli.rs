//! End-to-end checks of the binary: subcommands, exit codes, and the file
//! formats it writes.

use std::path::Path;
use std::process::{Command, Output};

fn twochoice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twochoice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn list_presets_names_every_table() {
    let out = twochoice(&["list-presets"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    for name in ["table1a", "table1b", "table2a", "table2b", "table3", "table4", "table5", "table6"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn validate_accepts_presets_and_echoes_the_config() {
    let out = twochoice(&["validate", "--preset", "table5"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("lambda = 0.9"));
    assert!(text.contains("kind = queue"));
}

#[test]
fn config_errors_exit_1_with_the_field_named() {
    let out = twochoice(&["validate", "--preset", "table5", "--lambda", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lambda"), "{err}");

    let out = twochoice(&["run", "--preset", "no_such_table"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_2() {
    let out = twochoice(&[
        "run",
        "--kind",
        "fluid",
        "--d",
        "3",
        "--T",
        "1",
        "--out",
        "/proc/definitely/not/writable",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fluid_run_writes_the_csv_with_a_json_header() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fluid");
    let out = twochoice(&[
        "run",
        "--kind",
        "fluid",
        "--d",
        "3",
        "--T",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("fluid.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# {"));
    let meta: serde_json::Value = serde_json::from_str(&header[2..]).unwrap();
    assert_eq!(meta["d"], 3);
    assert_eq!(meta["method"], "rk4");
    assert_eq!(lines.next().unwrap(), "level,tail_fraction");
    let row3: Vec<&str> = lines.nth(3).unwrap().split(',').collect();
    assert_eq!(row3[0], "3");
    let x3: f64 = row3[1].parse().unwrap();
    assert!((x3 - 0.00051).abs() < 1e-5);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["meta"]["generator_id"], "splitmix64");
    assert_eq!(report["meta"]["kind"], "fluid");
}

#[test]
fn coupled_run_reports_zero_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("coupled");
    let out = twochoice(&[
        "run", "--kind", "coupled", "--n", "101", "--m", "500", "--d", "3", "--trials", "100",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout_of(&out).contains("majorization_violations = 0"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["coupled"]["majorization_violations"], 0);
    assert_eq!(report["coupled"]["steps_total"], 50_000);
    let csv = std::fs::read_to_string(out_dir.join("coupled_trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101); // header + one row per seed
}

#[test]
fn check_flag_exits_3_on_a_missed_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("check");
    // An expectation no correct integrator can meet.
    let out = twochoice(&[
        "run",
        "--kind",
        "fluid",
        "--d",
        "3",
        "--T",
        "1",
        "--set",
        "expect.fluid_tail.1=0.5 0.0001",
        "--out",
        out_dir.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout_of(&out).contains("FAIL fluid_tail.1"));

    // And the same run with the real value passes.
    let out = twochoice(&[
        "run",
        "--kind",
        "fluid",
        "--d",
        "3",
        "--T",
        "1",
        "--set",
        "expect.fluid_tail.1=0.8231 0.0001",
        "--out",
        out_dir.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("PASS fluid_tail.1"));
}

#[test]
fn trial_rows_are_replayable_from_the_report_header() {
    // A report's header carries the resolved config; re-running from it
    // reproduces the files byte for byte.
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = twochoice(&[
        "run", "--preset", "table2a", "--trials", "25", "--n", "512", "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("report.json")).unwrap())
            .unwrap();

    // Rebuild a config file from the header and run it elsewhere.
    let config_map = report["meta"]["config"].as_object().unwrap();
    let mut config_text = String::new();
    for (k, v) in config_map {
        if k == "output" {
            continue;
        }
        config_text.push_str(&format!("{k} = {}\n", v.as_str().unwrap()));
    }
    let config_path = dir.path().join("replay.conf");
    std::fs::write(&config_path, config_text).unwrap();
    let second = dir.path().join("second");
    let out = twochoice(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for name in ["trials_random_distinct.csv", "trials_double.csv", "comparison.csv"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs under replay");
    }
}

#[test]
fn queue_csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("queue");
    let out = twochoice(&[
        "run", "--kind", "queue", "--schemes", "double", "--n", "256", "--lambda", "0.8", "--d",
        "2", "--horizon", "200", "--burn-in", "20", "--trials", "2", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("queue_trials.csv")).unwrap();
    assert!(csv.starts_with(
        "scheme,n,lambda,d,seed,horizon,burn_in,mean_sojourn,jobs_counted,s1,s2,s3,s4"
    ));
    assert_eq!(csv.lines().count(), 3);
    assert!(Path::new(&out_dir.join("report.json")).exists());
}
