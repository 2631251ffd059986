//! Metrics, seed aggregation and the cross-L1 evaluation matrix.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConfusorPatterns, KvlItem, L1};
use crate::features::extract_features;
use crate::model::{ModelError, TreeEnsemble};
use crate::resources::ResourceBundle;
use crate::stats::percentile;

pub use crate::stats::{pearson, rmse, spearman};

/// Evaluation seeds 1, 8, 15, …, 134.
pub const EVAL_SEEDS: [u64; 20] = {
    let mut s = [0u64; 20];
    let mut i = 0;
    while i < 20 {
        s[i] = 1 + 7 * i as u64;
        i += 1;
    }
    s
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and gold vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty evaluation set")]
    Empty,
    #[error("item {0} has no gold difficulty")]
    MissingGold(String),
    #[error("model trained on {0} carries no character vectorizer")]
    MissingVectorizer(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    /// `None` when either input is constant.
    pub pearson: Option<f64>,
    pub pearson_undefined: bool,
    pub n_items: usize,
}

pub fn score(pred: &[f64], gold: &[f64]) -> Result<Metrics, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch(pred.len(), gold.len()));
    }
    let rmse = rmse(pred, gold).ok_or(EvalError::Empty)?;
    let r = pearson(pred, gold);
    Ok(Metrics {
        rmse,
        pearson: r,
        pearson_undefined: r.is_none(),
        n_items: pred.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub l1_train: L1,
    pub l1_test: L1,
    pub model: String,
    pub seeds: Vec<u64>,
    pub n_items: usize,
    pub rmse_median: f64,
    pub rmse_p5: f64,
    pub rmse_p95: f64,
    pub pearson_median: Option<f64>,
    pub per_seed: Vec<SeedMetrics>,
}

/// Median and 5th/95th percentiles across seeds.
pub fn aggregate(l1_train: L1, l1_test: L1, model: &str, per_seed: Vec<SeedMetrics>) -> Result<EvalReport, EvalError> {
    let rmses: Vec<f64> = per_seed.iter().map(|s| s.metrics.rmse).collect();
    let rs: Vec<f64> = per_seed.iter().filter_map(|s| s.metrics.pearson).collect();
    Ok(EvalReport {
        l1_train,
        l1_test,
        model: model.to_string(),
        seeds: per_seed.iter().map(|s| s.seed).collect(),
        n_items: per_seed.first().map_or(0, |s| s.metrics.n_items),
        rmse_median: percentile(&rmses, 50.0).ok_or(EvalError::Empty)?,
        rmse_p5: percentile(&rmses, 5.0).ok_or(EvalError::Empty)?,
        rmse_p95: percentile(&rmses, 95.0).ok_or(EvalError::Empty)?,
        pearson_median: percentile(&rs, 50.0),
        per_seed,
    })
}

pub fn gold_of(items: &[KvlItem]) -> Result<Vec<f64>, EvalError> {
    items
        .iter()
        .map(|i| i.difficulty.ok_or_else(|| EvalError::MissingGold(i.item_id.clone())))
        .collect()
}

/// Predict `items` with `model`, extracting features with the model's own
/// frozen vectorizer.
pub fn predict_items(
    model: &TreeEnsemble,
    items: &[KvlItem],
    bundle: &ResourceBundle,
    confusors: &ConfusorPatterns,
) -> Result<Vec<f64>, EvalError> {
    let vec = model.vectorizer.as_ref().ok_or_else(|| {
        EvalError::MissingVectorizer(model.l1.map_or("an unknown L1".into(), |l| l.code().to_string()))
    })?;
    let rows: Vec<_> = items
        .par_iter()
        .map(|i| extract_features(i, bundle, vec, confusors))
        .collect();
    Ok(model.predict_many(&rows)?)
}

/// Evaluate every train-L1 model set on every test split. Cells are keyed
/// `(train, test)`.
pub fn cross_l1_matrix(
    models: &BTreeMap<L1, Vec<(u64, TreeEnsemble)>>,
    tests: &BTreeMap<L1, Vec<KvlItem>>,
    bundle: &ResourceBundle,
    confusors: &ConfusorPatterns,
) -> Result<BTreeMap<(L1, L1), EvalReport>, EvalError> {
    let mut out = BTreeMap::new();
    for (&train, seeds) in models {
        for (&test, items) in tests {
            let gold = gold_of(items)?;
            let per_seed = seeds
                .iter()
                .map(|(seed, m)| {
                    let pred = predict_items(m, items, bundle, confusors)?;
                    Ok(SeedMetrics {
                        seed: *seed,
                        metrics: score(&pred, &gold)?,
                    })
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            out.insert((train, test), aggregate(train, test, "gbdt", per_seed)?);
        }
    }
    Ok(out)
}

/// `cross_l1.csv`: one row per cell with rmse median, Pearson median and
/// the 5th/95th RMSE percentiles.
pub fn write_cross_l1_csv<W: Write>(cells: &BTreeMap<(L1, L1), EvalReport>, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["l1_train", "l1_test", "rmse", "r", "p5", "p95", "n_seeds", "n_items"])?;
    for ((a, b), r) in cells {
        w.write_record([
            a.code().to_string(),
            b.code().to_string(),
            r.rmse_median.to_string(),
            r.pearson_median.map(|v| v.to_string()).unwrap_or_default(),
            r.rmse_p5.to_string(),
            r.rmse_p95.to_string(),
            r.seeds.len().to_string(),
            r.n_items.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(EVAL_SEEDS[0], 1);
        assert_eq!(EVAL_SEEDS[1], 8);
        assert_eq!(EVAL_SEEDS[19], 134);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(score(&[1.0, 2.0], &[1.0, 2.0]).unwrap().rmse, 0.0);
        assert_eq!(score(&[2.0, 3.0], &[1.0, 2.0]).unwrap().rmse, 1.0);
        let m = score(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((m.rmse - 3.5355339059327378).abs() < 1e-12);
        assert!(m.pearson_undefined && m.pearson.is_none());
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(score(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn aggregation_percentiles() {
        let per_seed = (0..5)
            .map(|i| SeedMetrics {
                seed: i,
                metrics: Metrics {
                    rmse: 1.0 + i as f64 * 0.1,
                    pearson: Some(0.5),
                    pearson_undefined: false,
                    n_items: 10,
                },
            })
            .collect();
        let r = aggregate(L1::Es, L1::Es, "gbdt", per_seed).unwrap();
        assert!((r.rmse_median - 1.2).abs() < 1e-12);
        assert!((r.rmse_p5 - 1.02).abs() < 1e-12);
        assert!((r.rmse_p95 - 1.38).abs() < 1e-12);
    }
}
