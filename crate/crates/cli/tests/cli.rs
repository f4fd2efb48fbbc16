//! End-to-end checks of the compiled binary: exit codes, CSV schema and
//! determinism, config-file layering, and plot emission.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mco_lab::table::ResultTable;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mco-lab"))
}

fn tmp(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary launches")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// The emitted CSV with its wall-time metadata line removed.
fn stable_bytes(path: &Path) -> String {
    let text = std::fs::read_to_string(path).expect("output file exists");
    text.lines()
        .filter(|line| !line.starts_with("# wall_time_ms:"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn unknown_experiment_exits_with_usage_error_listing_names() {
    let output = run(&["no-such-experiment", "--seed", "1"]);
    assert_eq!(output.status.code(), Some(1), "unknown name is a usage error");
    let message = stderr(&output);
    for name in [
        "sample-monotonicity",
        "id-counterexample",
        "majorization",
        "negative-dependence",
        "variance-heuristic",
        "log-stable",
        "khat",
        "fdiv-monotonicity",
    ] {
        assert!(message.contains(name), "error must list {name}: {message}");
    }
}

#[test]
fn missing_seed_is_a_usage_error() {
    let output = run(&["id-counterexample"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(
        stderr(&output).contains("--seed"),
        "message must name the missing flag"
    );
}

#[test]
fn invalid_parameter_is_a_usage_error() {
    let output = run(&["log-stable", "--seed", "1", "--stability", "1.5"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("--stability"));
}

#[test]
fn malformed_config_file_is_a_usage_error() {
    let path = tmp("broken.json");
    std::fs::write(&path, "{not json").unwrap();
    let output = run(&[
        "id-counterexample",
        "--seed",
        "1",
        "--config",
        path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("config file"));
}

#[test]
fn unwritable_output_path_is_a_runtime_error() {
    let output = run(&[
        "id-counterexample",
        "--seed",
        "1",
        "--out",
        "/no-such-directory-mco/r.csv",
    ]);
    assert_eq!(output.status.code(), Some(2), "I/O failures are runtime errors");
    assert!(stderr(&output).contains("cannot write"));
}

#[test]
fn counterexample_csv_round_trips_with_frozen_values() {
    let out = tmp("counterexample.csv");
    let output = run(&[
        "id-counterexample",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));

    let text = std::fs::read_to_string(&out).unwrap();
    let table = ResultTable::from_csv(&text).expect("emitted CSV parses");
    assert_eq!(
        table.to_csv(),
        text,
        "parse → serialize must reproduce the file byte for byte"
    );

    let value = |row: usize, col: usize| {
        table.rows[row][col]
            .as_number()
            .and_then(|n| n.finite())
            .expect("numeric cell")
    };
    assert!((value(0, 1) - 0.62122666244700008).abs() < 1e-12);
    assert!((value(1, 1) - 0.61418394320532600).abs() < 1e-12);
    let difference: f64 = table
        .metadata
        .iter()
        .find(|(k, _)| k == "difference")
        .map(|(_, v)| v.parse().unwrap())
        .expect("difference metadata present");
    assert!(difference > 0.0, "two draws must beat three here");
    let config_echo = table
        .metadata
        .iter()
        .find(|(k, _)| k == "config")
        .map(|(_, v)| v.clone())
        .expect("config echo present");
    assert!(
        config_echo.contains("\"seed\":5"),
        "metadata must echo the exact seed: {config_echo}"
    );
}

#[test]
fn monotonicity_sweep_is_nondecreasing_and_deterministic() {
    let out = tmp("mono.csv");
    let mut snapshots = Vec::new();
    for seed in ["7", "7", "8"] {
        let output = run(&[
            "sample-monotonicity",
            "--seed",
            seed,
            "--reps",
            "100000",
            "--k-list",
            "1,2,4,8",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
        snapshots.push((stable_bytes(&out), std::fs::read_to_string(&out).unwrap()));
    }
    assert_eq!(
        snapshots[0].0, snapshots[1].0,
        "same config must give byte-identical output apart from wall time"
    );
    assert_ne!(
        snapshots[0].0, snapshots[2].0,
        "a different seed must change the numbers"
    );

    let table = ResultTable::from_csv(&snapshots[0].1).unwrap();
    assert_eq!(table.rows.len(), 4, "one row per particle count");
    let get = |row: usize, name: &str| {
        let idx = table.column_index(name).unwrap();
        table.rows[row][idx].as_number().unwrap().finite().unwrap()
    };
    for row in 0..3 {
        let slack = 3.0
            * (get(row, "std_error").powi(2) + get(row + 1, "std_error").powi(2)).sqrt();
        assert!(
            get(row + 1, "mco") >= get(row, "mco") - slack,
            "objective fell between rows {row} and {}",
            row + 1
        );
    }
}

#[test]
fn flags_override_the_config_file() {
    let config_path = tmp("layered.json");
    std::fs::write(&config_path, r#"{"seed": 3, "reps": 2000, "k_list": [1, 2]}"#).unwrap();
    let out = tmp("layered.csv");
    let output = run(&[
        "sample-monotonicity",
        "--reps",
        "1500",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let table = ResultTable::from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let config_echo = &table
        .metadata
        .iter()
        .find(|(k, _)| k == "config")
        .unwrap()
        .1;
    assert!(
        config_echo.contains("\"reps\":1500"),
        "flag value must win: {config_echo}"
    );
    assert!(
        config_echo.contains("\"seed\":3"),
        "file seed still applies: {config_echo}"
    );
    assert_eq!(table.rows.len(), 2, "k list came from the file");
}

#[test]
fn log_stable_output_contains_symbolic_minus_infinity() {
    let out = tmp("logstable.csv");
    let output = run(&[
        "log-stable",
        "--seed",
        "2",
        "--reps",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(
        text.lines().any(|l| l.starts_with("closed_form_log_mean") && l.ends_with(",-inf")),
        "the closed-form log mean must print as -inf"
    );
}

#[test]
fn plot_flag_writes_an_svg_chart() {
    let out = tmp("majorization.csv");
    let output = run(&[
        "majorization",
        "--seed",
        "4",
        "--reps",
        "2000",
        "--dirichlet",
        "3",
        "--plot",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let svg = std::fs::read_to_string(out.with_extension("svg")).unwrap();
    assert!(svg.starts_with("<svg"), "SVG document expected");
    assert!(svg.contains("polyline"), "series lines expected");
    assert!(svg.contains("interpolation"), "legend must name the series");
}

#[test]
fn khat_experiment_reports_both_proposals() {
    let out = tmp("khat.csv");
    let output = run(&[
        "khat",
        "--seed",
        "6",
        "--obs",
        "6",
        "--samples",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let table = ResultTable::from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 12, "six observations for each proposal");
    let medians: Vec<&(String, String)> = table
        .metadata
        .iter()
        .filter(|(k, _)| k.starts_with("median_khat_"))
        .collect();
    assert_eq!(medians.len(), 2, "one median per proposal");
}
