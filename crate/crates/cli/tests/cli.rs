use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lexdiff_core::config::RunConfig;
use lexdiff_core::fixtures::{SyntheticConfig, SyntheticData};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lexdiff"));
    c.env("RUST_LOG", "warn");
    c
}

fn fixture(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::default();
    cfg.gbdt.n_iterations = 30;
    cfg.gbdt.tree_depth = 3;
    cfg.gbdt.learning_rate = 0.1;
    cfg.seeds = vec![1];
    cfg.analysis.bootstrap_resamples = 30;
    cfg.analysis.grid_resolution = 15;
    SyntheticData::generate(&SyntheticConfig {
        split_sizes: [120, 20, 40],
        ..SyntheticConfig::default()
    })
    .write_to(dir, &cfg)
    .unwrap();
    dir.join("config.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON error in {text}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn help_documents_every_subcommand() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["extract", "train", "evaluate", "explain", "analyze", "predict", "serve"] {
        assert!(text.contains(sub), "{sub} missing from help");
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        let help = String::from_utf8(out.stdout).unwrap();
        for flag in ["--config", "--output-dir", "--l1", "--seeds"] {
            assert!(help.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    let help = String::from_utf8(run(&["serve", "--help"]).stdout).unwrap();
    for flag in ["--bind", "--inflections", "--cors-origin", "--max-text-bytes", "--top-k"] {
        assert!(help.contains(flag), "serve --help lacks {flag}");
    }
}

#[test]
fn unknown_flags_fail_fast() {
    let out = run(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["error"]["kind"], "config_error");
    assert_eq!(err["error"]["exit_code"], 2);
    assert_eq!(run(&["extract", "--l1", "fr"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seeds = []\n").unwrap();
    let out = run(&["extract", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = run(&["extract", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    let out = run(&["extract", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn extract_writes_feature_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let out = run(&["extract", "--config", cfg.to_str().unwrap(), "--l1", "de", "--split", "train"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "stdout is reserved for predict");
    let path = dir.path().join("out/features/de_train.csv");
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let names = lexdiff_core::features::Feature::ALL;
    assert_eq!(names.len(), 24);
    assert!(names.iter().all(|f| headers.iter().any(|h| h == f.name())));
    let kvl_rows = csv::Reader::from_path(dir.path().join("kvl/de_train.csv")).unwrap().records().count();
    assert_eq!(rdr.records().count(), kvl_rows);
    assert!(!dir.path().join("out/features/es_train.csv").exists());
    assert!(!dir.path().join("out/.lexdiff.lock").exists());
}

#[test]
fn train_evaluate_explain_analyze_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let c = cfg.to_str().unwrap();
    let out = run(&["train", "--config", c, "--l1", "es", "--seeds", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/models/es/gbdt_seed1.json").exists());
    assert!(!dir.path().join("out/models/de").exists());

    let out = run(&["evaluate", "--config", c]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/eval/eval_report.json")).unwrap()).unwrap();
    let rmse = report["gbdt"][0]["rmse_median"].as_f64().unwrap();
    assert!(rmse.is_finite() && rmse > 0.0);

    for cmd in ["explain", "analyze"] {
        let out = run(&[cmd, "--config", c, "--l1", "es"]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(dir.path().join("out/explain/es/attributions_seed1.csv").exists());
    assert!(dir.path().join("out/analysis/aitchison.csv").exists());

    let words = dir.path().join("words.txt");
    std::fs::write(&words, "# demo\ncable,cable,noun\nhouse\n").unwrap();
    let out = run(&["predict", "--config", c, words.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let preds = v["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 2);
    assert_eq!(preds[0]["target_word"], "cable");
    assert_eq!(preds[0]["l1"], "es");
    let total: f64 = preds[0]["group_shares"].as_object().unwrap().values().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let kvl = dir.path().join("kvl/es_test.csv");
    let out = run(&["predict", "--config", c, kvl.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let kvl_rows = csv::Reader::from_path(&kvl).unwrap().records().count();
    assert_eq!(v["predictions"].as_array().unwrap().len(), kvl_rows);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let c = cfg.to_str().unwrap();
    let model = dir.path().join("out/models/zh/gbdt_seed1.json");
    assert!(run(&["train", "--config", c, "--l1", "zh"]).status.success());
    let first = std::fs::read(&model).unwrap();
    assert!(run(&["train", "--config", c, "--l1", "zh"]).status.success());
    assert_eq!(first, std::fs::read(&model).unwrap());
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let out = run(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_error(&out);
    assert_eq!(err["error"]["kind"], "data_error");
    assert!(err["error"]["message"].as_str().unwrap().contains("train"));

    std::fs::write(dir.path().join("kvl/de_train.csv"), "source_word,target_word\n").unwrap();
    let out = run(&["train", "--config", cfg.to_str().unwrap(), "--l1", "de"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn held_lock_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    std::fs::write(dir.path().join("out/.lexdiff.lock"), "1").unwrap();
    let out = run(&["extract", "--config", cfg.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr_error(&out)["error"]["message"].as_str().unwrap().contains("locked"));
}

#[test]
fn serve_answers_over_http() {
    use std::io::{BufRead, BufReader, Read, Write};

    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let c = cfg.to_str().unwrap();
    assert!(run(&["train", "--config", c, "--l1", "de"]).status.success());
    let mut child = bin()
        .env("RUST_LOG", "info")
        .args(["serve", "--config", c, "--bind", "127.0.0.1:0"])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited before listening").unwrap();
        if let Some(rest) = line.split("listening on http://").nth(1) {
            break rest.trim().to_string();
        }
    };
    let mut stream = std::net::TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /v1/word/de/cable HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    let _ = child.wait();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let body: Value = serde_json::from_str(resp.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["lemma"], "cable");
    assert_eq!(body["l1"], "de");
}
