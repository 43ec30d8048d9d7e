//! End-to-end runs of the `trajsample` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use trajsample::io::{parse_scenario_file, read_candidates};

fn trajsample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajsample"))
        .args(args)
        .env_remove("TRAJSAMPLE_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// The single JSON error line printed on failure.
fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small generated scenario file.
fn small_dataset(dir: &Path, scenarios: &str) -> std::path::PathBuf {
    let file = dir.join("scenarios.jsonl");
    let out = trajsample(&[
        "generate",
        "--scenarios",
        scenarios,
        "--proposals-per-model",
        "4",
        "--horizon",
        "6",
        "--output",
        path_str(&file),
    ]);
    assert!(out.status.success(), "{out:?}");
    file
}

#[test]
fn verify_passes_on_the_bundled_fixture() {
    let out = trajsample(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout(&out);
    for check in ["gradient", "geometric-median", "subset-dominance"] {
        assert!(report.contains(&format!("{check}: PASS")), "{report}");
    }
    assert!(!report.contains("FAIL"));
}

#[test]
fn compare_one_sampler_on_one_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "1");
    let out = trajsample(&[
        "compare",
        "--input",
        path_str(&data),
        "--samplers",
        "topk",
        "--count",
        "3",
        "--ks",
        "1,3",
    ]);
    assert!(out.status.success(), "{out:?}");
    let csv = stdout(&out);
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert_eq!(lines[0], "sampler,minADE_1,minADE_3,minFDE_1,minFDE_3");
    let cells: Vec<_> = lines[1].split(',').collect();
    assert_eq!(cells[0], "topk");
    assert_eq!(cells.len(), 5);
    for cell in &cells[1..] {
        assert!(cell.parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn unknown_sampler_is_a_config_error_naming_the_field() {
    let out = trajsample(&["compare", "--samplers", "bogus", "--scenarios", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "config");
    assert_eq!(err["field"], "samplers[0]");
    assert!(err["message"].as_str().unwrap().contains("bogus"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let out = trajsample(&["compare", "--count", "many"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "usage");
    let out = trajsample(&["sample", "--loss", "min-xyz"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "2");
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "count = 2\nks = [2]\nsamplers = [\"bogus\"]\n").unwrap();
    let out = trajsample(&["--config", path_str(&config), "compare", "--input", path_str(&data)]);
    assert_eq!(error_line(&out)["field"], "samplers[0]");

    let out = trajsample(&[
        "--config",
        path_str(&config),
        "compare",
        "--input",
        path_str(&data),
        "--samplers",
        "kmeans",
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).starts_with("sampler,minADE_2,minFDE_2\nkmeans,"));

    // the environment variable names the default config file
    let out = Command::new(env!("CARGO_BIN_EXE_trajsample"))
        .args(["compare", "--input", path_str(&data)])
        .env("TRAJSAMPLE_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["field"], "samplers[0]");

    std::fs::write(&config, "cuont = 2\n").unwrap();
    let out = trajsample(&["--config", path_str(&config), "generate"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn data_errors_exit_2_with_the_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "2");
    let mut text = std::fs::read_to_string(&data).unwrap();
    text.push_str("{\"scenario_id\":\"x\",\"horizon\":6,\"models\":[]}\n");
    std::fs::write(&data, text).unwrap();
    let out = trajsample(&["compare", "--input", path_str(&data), "--samplers", "topk"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_line(&out);
    assert_eq!(err["error"], "data");
    assert_eq!(err["line"], 3);

    let out = trajsample(&["compare", "--input", path_str(&dir.path().join("missing.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "io");
}

#[test]
fn compare_without_ground_truth_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("nogt.jsonl");
    std::fs::write(
        &data,
        r#"{"scenario_id":"a","horizon":1,"models":[{"model_id":"m","proposals":[{"weight":1,"points":[[0,0]]}]}]}"#,
    )
    .unwrap();
    let out = trajsample(&["compare", "--input", path_str(&data), "--count", "1", "--ks", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("ground truth"));
}

#[test]
fn renormalized_inputs_warn() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("weights.jsonl");
    std::fs::write(
        &data,
        r#"{"scenario_id":"a","horizon":1,"models":[{"model_id":"m","proposals":[{"weight":3,"points":[[0,0]]}]}]}"#,
    )
    .unwrap();
    let out = trajsample(&["sample", "--input", path_str(&data), "--count", "1", "--ks", "1"]);
    assert!(out.status.success(), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("renormalized"));
}

#[test]
fn identical_compare_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "6");
    let run = |name: &str, threads: &str| {
        let csv = dir.path().join(format!("{name}.csv"));
        let out = trajsample(&[
            "compare",
            "--input",
            path_str(&data),
            "--count",
            "5",
            "--ks",
            "1,5",
            "--threads",
            threads,
            "--output",
            path_str(&csv),
            "--timing-output",
            path_str(&dir.path().join(format!("{name}-timing.csv"))),
        ]);
        assert!(out.status.success(), "{out:?}");
        std::fs::read(csv).unwrap()
    };
    let first = run("a", "1");
    assert_eq!(first, run("b", "1"));
    assert_eq!(first, run("c", "3"));
    let timing = std::fs::read_to_string(dir.path().join("a-timing.csv")).unwrap();
    assert!(timing.starts_with("sampler,wall_clock_s\n"));
    assert_eq!(timing.lines().count(), 1 + 7);
}

#[test]
fn generated_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "3");
    let first = std::fs::read(&data).unwrap();
    let parsed = parse_scenario_file(&data).unwrap();
    assert_eq!(parsed.len(), 3);
    let mut again = Vec::new();
    trajsample::io::write_scenarios(&mut again, &parsed).unwrap();
    assert_eq!(first, again);
}

#[test]
fn sample_writes_one_record_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path(), "3");
    let out = trajsample(&["sample", "--input", path_str(&data), "--count", "4", "--ks", "4"]);
    assert!(out.status.success(), "{out:?}");
    let records = read_candidates(out.stdout.as_slice()).unwrap();
    assert_eq!(records.len(), 3);
    for r in &records {
        assert_eq!(r.sampler, "ours");
        assert_eq!(r.candidates.len(), 4);
        assert!(r.candidates.iter().all(|c| c.len() == 6));
    }

    let out = trajsample(&["sample", "--sampler", "nope", "--input", path_str(&data)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["field"], "sampler");
}

#[test]
fn sweeps_write_long_format_csv() {
    let out = trajsample(&[
        "sweep-proposals",
        "--sweep-scenarios",
        "3",
        "--sweep-count",
        "2",
        "--proposal-counts",
        "3,6",
        "--steps",
        "16",
    ]);
    assert!(out.status.success(), "{out:?}");
    let csv = stdout(&out);
    assert!(csv.starts_with("x,sampler,metric,value\n"));
    assert!(csv.contains("\n6,ours,minADE_2,"));
    assert!(csv.contains("\n6,topk,minADE_2_delta,"));

    let out = trajsample(&[
        "sweep-nms",
        "--sweep-scenarios",
        "3",
        "--sweep-count",
        "2",
        "--nms-thresholds",
        "0.5,2",
    ]);
    assert!(out.status.success(), "{out:?}");
    let csv = stdout(&out);
    assert!(csv.contains("\n0.5,nms-kmeans,minADE_2,"));
    assert!(csv.contains("\n2,nms-kmeans,minFDE_2,"));

    let out = trajsample(&["sweep-nms", "--nms-thresholds", "0,1"]);
    assert_eq!(error_line(&out)["field"], "sweep.nms_thresholds[0]");
}
