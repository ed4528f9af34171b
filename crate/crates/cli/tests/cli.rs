use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cmi_core::engine::delta_diagnostic;
use cmi_core::mc::{gen_sample, Case, Noise, Scenario, Table};
use cmi_core::rng::{stream, Stage};
use cmi_core::{AdaptiveTest, Sample, TestConfig, TestResult};
use serde_json::Value;
use tempfile::TempDir;

fn cmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmi")).args(args).env_remove("CMI_SEED").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_csv(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn sample_csv(sample: &Sample) -> String {
    let mut text = String::from("x1,y1\n");
    for j in 0..sample.n() {
        text.push_str(&format!("{},{}\n", sample.x().row(j)[0], sample.y(j, 0)));
    }
    text
}

fn case4_sample() -> Sample {
    let scenario = Scenario::new(Case::Peak, Noise::NORMAL, 250);
    gen_sample(&scenario, &mut stream(0, Stage::Data, 0)).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn constant_zero_response_does_not_reject() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "zero.csv", "x1,y1\n0,0\n1,0\n");
    let out = cmi(&["test", s(&csv), "--alpha", "0.1", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json = read_json(&dir.path().join("result.json"));
    assert_eq!(json["result"]["statistic"], 0.0);
    assert_eq!(json["result"]["reject"], false);
}

#[test]
fn peaked_alternative_rejects_with_rms() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "case4.csv", &sample_csv(&case4_sample()));
    let out = cmi(&["test", s(&csv), "--alpha", "0.1", "--method", "rms", "--separation", "1", "--out", s(dir.path())]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("decision: reject"));

    // Same answer as the library on the same data.
    let cfg = TestConfig { alpha: 0.1, separation_factor: 1.0, ..Default::default() };
    let direct = AdaptiveTest::new(cfg).unwrap().run(&case4_sample()).unwrap();
    let json = read_json(&dir.path().join("result.json"));
    let from_cli: TestResult = serde_json::from_value(json["result"].clone()).unwrap();
    assert_eq!(from_cli.statistic, direct.statistic);
    assert_eq!(from_cli.critical_value, direct.critical_value);
}

#[test]
fn non_numeric_cell_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "bad.csv", "x1,y1\n0,1\n1,oops\n2,3\n");
    let out = cmi(&["test", s(&csv), "--out", s(dir.path())]);
    assert_eq!(code(&out), 4);
    let err = stderr(&out);
    assert!(err.contains("row 2") && err.contains("column 2") && err.contains("oops"), "{err}");
}

#[test]
fn inconsistent_rows_and_missing_file() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "ragged.csv", "x1,y1,y2\n0,1,2\n1,2\n");
    assert_eq!(code(&cmi(&["test", s(&csv), "--out", s(dir.path())])), 4);
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&cmi(&["test", s(&missing), "--out", s(dir.path())])), 1);
}

#[test]
fn result_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "case4.csv", &sample_csv(&case4_sample()));
    let out = cmi(&["test", s(&csv), "--beta", "0.3", "--B", "200", "--seed", "11", "--out", s(dir.path())]);
    assert!(matches!(code(&out), 0 | 3), "{}", stderr(&out));
    let json = read_json(&dir.path().join("result.json"));
    let result: TestResult = serde_json::from_value(json["result"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&result).unwrap(), json["result"]);
    let config: TestConfig = serde_json::from_value(json["config"].clone()).unwrap();
    assert_eq!(config.seed, 11);
    assert_eq!(config.bootstrap_draws, 200);
    assert!(result.u_draw.is_some() && result.diagnostics.delta.is_some());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "case4.csv", &sample_csv(&case4_sample()));
    let run = |sub: &str, threads: &str| {
        let out_dir = dir.path().join(sub);
        let out = cmi(&["--threads", threads, "test", s(&csv), "--seed", "4", "--out", s(&out_dir)]);
        assert!(matches!(code(&out), 0 | 3));
        std::fs::read(out_dir.join("result.json")).unwrap()
    };
    let a = run("a", "0");
    assert_eq!(a, run("b", "0"));
    assert_eq!(a, run("c", "1"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "zero.csv", "x1,y1\n0,0\n1,0\n");
    let out = Command::new(env!("CARGO_BIN_EXE_cmi"))
        .args(["test", s(&csv), "--out", s(dir.path())])
        .env("CMI_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&dir.path().join("result.json"))["config"]["seed"], 1234);
}

#[test]
fn config_file_layers_under_flags() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "zero.csv", "x1,y1\n0,0\n1,0\n2,0\n");
    let cfg = write_csv(
        dir.path(),
        "cfg.json",
        &format!(r#"{{"alpha": 0.2, "B": 150, "method": "pia", "input": "{}"}}"#, s(&csv)),
    );
    let out = cmi(&["test", "--config", s(&cfg), "--B", "120", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json = read_json(&dir.path().join("result.json"));
    assert_eq!(json["config"]["alpha"], 0.2);
    assert_eq!(json["config"]["B"], 120);
    assert_eq!(json["result"]["method"], "pia");
    // Defaults are echoed too.
    assert_eq!(json["config"]["a"], 0.8);

    let bad = write_csv(dir.path(), "bad.json", r#"{"alpha": 0.2, "colour": "blue"}"#);
    let out = cmi(&["test", s(&csv), "--config", s(&bad), "--out", s(dir.path())]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("colour"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "zero.csv", "x1,y1\n0,0\n1,0\n");
    for args in [
        vec!["test", s(&csv), "--alpha", "1.5"],
        vec!["test", s(&csv), "--separation", "3"],
        vec!["test", s(&csv), "--kernel", "gaussian"],
        vec!["test", s(&csv), "--method", "gms"],
        vec!["test"],
        vec!["mc", "--n", "50", "--cases", "5"],
        vec!["probe", "bogus"],
        vec!["diag", s(&csv)],
    ] {
        let out = cmi(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
}

fn mc_table(dir: &Path, sub: &str, extra: &[&str]) -> (Vec<u8>, String) {
    let out_dir = dir.join(sub);
    let mut args = vec!["mc", "--n", "60", "--reps", "6", "--B", "100", "--seed", "3", "--out", s(&out_dir)];
    args.extend_from_slice(extra);
    let out = cmi(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json = std::fs::read(out_dir.join("table.json")).unwrap();
    let txt = std::fs::read_to_string(out_dir.join("table.txt")).unwrap();
    (json, txt)
}

#[test]
fn mc_case_filter_and_determinism() {
    let dir = TempDir::new().unwrap();
    let (json, txt) = mc_table(dir.path(), "one", &["--cases", "1"]);
    let table: Table = serde_json::from_slice(&json).unwrap();
    assert_eq!(table.cells.len(), 4);
    assert!(table.cells.iter().all(|c| c.case == Some(1)));
    assert!(txt.contains("Normal") && txt.contains("Mixture"));
    assert_eq!(table.config.alpha, 0.1);

    let (again, _) = mc_table(dir.path(), "two", &["--cases", "1"]);
    assert_eq!(json, again);
}

#[test]
fn mc_full_table_has_sixteen_cells() {
    let dir = TempDir::new().unwrap();
    let (json, _) = mc_table(dir.path(), "all", &[]);
    let table: Table = serde_json::from_slice(&json).unwrap();
    assert_eq!(table.cells.len(), 16);
}

fn diag_ratio(csv: &Path, beta: &str) -> f64 {
    let out = cmi(&["diag", s(csv), "--beta", beta]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let json_end = text.find("\n}\n").unwrap() + 2;
    let json: Value = serde_json::from_str(&text[..json_end]).unwrap();
    json["diagnostic"]["guarantee_ratio"].as_f64().unwrap()
}

#[test]
fn diag_matches_library_and_scales_with_beta() {
    let dir = TempDir::new().unwrap();
    let sample = case4_sample();
    let csv = write_csv(dir.path(), "case4.csv", &sample_csv(&sample));
    let out = cmi(&["diag", s(&csv), "--beta", "0.4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("WARN"), "{text}");

    let cfg = TestConfig { beta: 0.4, ..Default::default() };
    let prepared = AdaptiveTest::new(cfg.clone()).unwrap().prepare(&sample).unwrap();
    let d = delta_diagnostic(&prepared.statistic.smoothed, &prepared.cov, 1, cfg.beta, cfg.alpha).unwrap();
    assert_eq!(diag_ratio(&csv, "0.4"), d.guarantee_ratio);

    let ratio = diag_ratio(&csv, "0.8") / diag_ratio(&csv, "0.4");
    assert!((ratio - 2f64.powf(-5.0 / 3.0)).abs() < 1e-12, "{ratio}");
}

#[test]
fn probes_emit_json() {
    let out = cmi(&["probe", "anticoncentration", "--M", "100", "--reps", "20000", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["probe"], "anticoncentration");
    assert_eq!(json["within_envelope"], true);

    let out = cmi(&["probe", "invariance", "--n", "100", "--reps", "4000", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["holds"], true);
    assert!(json["report"]["gap"].as_f64().unwrap() <= json["report"]["bound"].as_f64().unwrap());
}
