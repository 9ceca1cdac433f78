use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_deeptime");

const TINY: &str = r#"
[train]
epochs = 3
warmup_epochs = 1
layers = 2
layer_size = 16
ff_size = 32
horizon = 12
batch_size = 16

[synth]
n_train_tasks = 40
n_test_tasks = 7
points = 40
lookback = 20
horizon = 20

[synth.train]
epochs = 3
warmup_epochs = 1
layers = 2
layer_size = 16
ff_size = 32
horizon = 20
"#;

fn deeptime(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("DEEPTIME_OUT")
        .env_remove("DEEPTIME_THREADS")
        .output()
        .expect("binary runs")
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    (dir, cfg)
}

fn write_csv(path: &Path, rows: usize) {
    let mut s = String::from("date,load,temp\n");
    let t0 = chrono::NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    for i in 0..rows {
        let stamp = t0 + chrono::Duration::hours(i as i64);
        let t = i as f64;
        s.push_str(&format!(
            "{},{:.6},{:.6}\n",
            stamp.format("%Y-%m-%d %H:%M:%S"),
            (t * 0.26).sin() * 3.0 + 10.0,
            (t * 0.05).cos()
        ));
    }
    std::fs::write(path, s).unwrap();
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = deeptime(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["synth", "train", "eval", "sweep", "ablate", "forecast", "profile"] {
        assert!(text.contains(cmd), "missing {cmd} in help");
    }
}

#[test]
fn missing_csv_is_a_data_error_naming_the_path() {
    let out = deeptime(&["train", "--csv", "/definitely/not/here.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    let first: Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(first["error"]["class"], "data");
    assert!(first["error"]["message"].as_str().unwrap().contains("/definitely/not/here.csv"));
    assert!(err.contains("/definitely/not/here.csv"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlayer_sise = 3\n").unwrap();
    let out = deeptime(&["--config", s(&cfg), "profile"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("layer_sise"));
    let out = deeptime(&["synth"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_report_has_one_record_per_test_task() {
    let (dir, cfg) = setup();
    let out_dir = dir.path().join("run");
    let out = deeptime(&[
        "--config",
        s(&cfg),
        "--seed",
        "3",
        "--out",
        s(&out_dir),
        "synth",
        "--family",
        "sines",
        "--dump-predictions",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["config"]["synth"]["train"]["seed"], 3);
    assert_eq!(r["result"]["metrics"]["per_window"].as_array().unwrap().len(), 7);
    assert_eq!(r["result"]["metrics"]["n_windows"], 7);
    let preds = std::fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 1 + 7 * 20);
}

#[test]
fn synth_results_do_not_depend_on_thread_count() {
    let (dir, cfg) = setup();
    let run = |threads: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = deeptime(&[
            "--config", s(&cfg), "--threads", threads, "--out", s(&out_dir), "synth", "--family", "cubic",
        ]);
        assert!(out.status.success());
        report(&out_dir)["result"].clone()
    };
    assert_eq!(run("1", "a"), run("3", "b"));
}

#[test]
fn train_then_eval_reproduces_validation_loss() {
    let (dir, cfg) = setup();
    let csv = dir.path().join("s.csv");
    write_csv(&csv, 500);
    let train_dir = dir.path().join("train");
    let out = deeptime(&["--config", s(&cfg), "--out", s(&train_dir), "train", "--csv", s(&csv), "--datetime"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let best = report(&train_dir)["result"]["train_report"]["best_val_loss"].as_f64().unwrap();

    let eval_dir = dir.path().join("eval");
    let ck = train_dir.join("checkpoint.json");
    let out = deeptime(&[
        "--out", s(&eval_dir), "eval", "--checkpoint", s(&ck), "--csv", s(&csv), "--split", "val", "--dump-forecasts",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mse = report(&eval_dir)["result"]["metrics"]["mse"].as_f64().unwrap();
    assert!((mse - best).abs() <= 1e-12, "{mse} vs {best}");
    let dump = std::fs::read_to_string(eval_dir.join("forecasts.csv")).unwrap();
    assert!(dump.starts_with("window_start,step,channel,y_true,y_pred\n"));

    let fc_dir = dir.path().join("fc");
    let out = deeptime(&["--out", s(&fc_dir), "forecast", "--checkpoint", s(&ck), "--csv", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fc = std::fs::read_to_string(fc_dir.join("forecast.csv")).unwrap();
    let lines: Vec<&str> = fc.lines().collect();
    assert_eq!(lines[0], "step,date,load,temp");
    assert_eq!(lines.len(), 1 + 12);
    assert!(lines[1].starts_with("1,2021-03-21 20:00:00,"));
}

#[test]
fn sweep_and_ablate_write_reports() {
    let (dir, cfg) = setup();
    let csv = dir.path().join("s.csv");
    write_csv(&csv, 1300);
    let sweep_dir = dir.path().join("sweep");
    let out = deeptime(&["--config", s(&cfg), "--out", s(&sweep_dir), "sweep", "--csv", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&sweep_dir);
    assert_eq!(r["result"]["sweep"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(r["result"]["sweep"]["test_accesses"], 1);

    let ab_dir = dir.path().join("ab");
    let out = deeptime(&[
        "--config", s(&cfg), "--out", s(&ab_dir), "ablate", "--variant", "no_cff", "--family", "linear",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&ab_dir)["result"]["ablation"]["variant"], "no_cff");

    let out = deeptime(&["--config", s(&cfg), "ablate", "--variant", "plus_datetime", "--family", "linear"]);
    assert_eq!(out.status.code(), Some(1));
}
