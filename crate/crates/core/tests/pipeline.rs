use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lexdiff_core::config::RunConfig;
use lexdiff_core::corpus::{Split, L1};
use lexdiff_core::fixtures::{SyntheticConfig, SyntheticData};
use lexdiff_core::pipeline::{discover_models, OutputLock, Pipeline, PipelineError};

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seeds = vec![1, 8];
    cfg.gbdt.n_iterations = 40;
    cfg.gbdt.tree_depth = 3;
    cfg.gbdt.learning_rate = 0.1;
    cfg.analysis.bootstrap_resamples = 50;
    cfg.analysis.grid_resolution = 20;
    cfg
}

fn synthetic() -> SyntheticData {
    SyntheticData::generate(&SyntheticConfig {
        split_sizes: [160, 30, 60],
        ..SyntheticConfig::default()
    })
}

fn run_all(dir: &Path) -> RunConfig {
    let cfg = synthetic().write_to(dir, &small_config()).unwrap();
    let p = Pipeline::open(cfg.clone()).unwrap();
    let l1s = p.l1s();
    let _lock = OutputLock::acquire(&p.layout).unwrap();
    p.extract(&l1s, &[Split::Train, Split::Dev, Split::Test]).unwrap();
    p.train(&l1s, None).unwrap();
    p.evaluate(&l1s, None).unwrap();
    p.explain(&l1s, None).unwrap();
    p.analyze(&l1s, None).unwrap();
    cfg
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_pipeline_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = run_all(a.path());
    let cb = run_all(b.path());
    let fa = files(&ca.output_dir);
    let fb = files(&cb.output_dir);
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs between runs", k.display());
    }
    for name in [
        "eval/eval_report.json",
        "eval/cross_l1.csv",
        "eval/table1.csv",
        "explain/table2_mean_abs_shap.csv",
        "models/de/gbdt_seed1.json",
        "models/zh/ridge.json",
        "features/es_dev.csv",
        "explain/de/attributions_seed8.csv",
        "analysis/fig3_group_means.csv",
        "analysis/fig4_simplex_es.svg",
        "analysis/aitchison.csv",
        "analysis/table2_spearman.csv",
        "analysis/fig10_difficulty_corr.csv",
        "analysis/fig11_freq_sim_zh.csv",
        "analysis/table5_ablation_de_test.csv",
    ] {
        assert!(fa.contains_key(Path::new(name)), "missing {name}");
    }
    assert!(!fa.keys().any(|k| k.ends_with(".lexdiff.lock")));
}

#[test]
fn reports_and_predictions_are_coherent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_all(dir.path());
    let out = &cfg.output_dir;

    let header = std::fs::read_to_string(out.join("features/de_train.csv")).unwrap();
    let cols = header.lines().next().unwrap().split(',').count();
    assert!(cols >= 24, "{cols} columns");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval/eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["gbdt"].as_array().unwrap().len(), 9);
    assert!(report["gbdt"][0]["rmse_median"].as_f64().unwrap() > 0.0);
    assert_eq!(report["ridge"].as_array().unwrap().len(), 3);

    let shap = std::fs::read_to_string(out.join("explain/table2_mean_abs_shap.csv")).unwrap();
    let line = shap.lines().find(|l| l.starts_with("char_similarity,")).unwrap();
    let zh_col = shap.lines().next().unwrap().split(',').position(|c| c == "zh").unwrap();
    assert_eq!(line.split(',').nth(zh_col).unwrap().parse::<f64>().unwrap(), 0.0);

    assert_eq!(discover_models(&out.join("models")).unwrap()[&L1::Es], vec![1, 8]);

    let p = Pipeline::open(cfg.clone()).unwrap();
    let items = p.split(L1::De, Split::Test).unwrap().items;
    let preds = p.predict(&items[..5], None).unwrap();
    assert_eq!(preds.len(), 5);
    for (pr, it) in preds.iter().zip(&items) {
        assert_eq!(pr.item_id, it.item_id);
        assert_eq!(pr.n_models, 2);
        let s: f64 = pr.group_shares.values().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn analyze_requires_explain_and_lock_is_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic().write_to(dir.path(), &small_config()).unwrap();
    let p = Pipeline::open(cfg).unwrap();
    let l1s = [L1::Es];
    p.train(&l1s, Some(&[1])).unwrap();
    let err = p.analyze(&l1s, Some(&[1])).unwrap_err();
    assert!(matches!(err, PipelineError::MissingArtifact { command: "explain", .. }), "{err}");
    assert_eq!(err.exit_code(), 3);

    let err = p.evaluate(&l1s, Some(&[99])).unwrap_err();
    assert!(matches!(err, PipelineError::MissingArtifact { command: "train", .. }));

    let held = OutputLock::acquire(&p.layout).unwrap();
    assert!(matches!(OutputLock::acquire(&p.layout), Err(PipelineError::Locked(_))));
    drop(held);
    assert!(OutputLock::acquire(&p.layout).is_ok());
}

#[test]
fn invalid_config_maps_to_exit_code_two() {
    let mut cfg = small_config();
    cfg.seeds.clear();
    let err = Pipeline::open(cfg).err().unwrap();
    assert_eq!(err.exit_code(), 2);
    assert_eq!(err.kind(), "config_error");
}
