//! Correlation tables: gold difficulty across L1s, features against each
//! other, and features against gold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{KvlItem, L1};
use crate::features::{Feature, FeatureRow};
use crate::stats::{pearson, spearman};
use crate::text::normalize_word;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub a: L1,
    pub b: L1,
    pub n_shared: usize,
    pub r: Option<f64>,
}

/// Mean gold difficulty per normalized target word.
fn gold_by_word(items: &[KvlItem]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for i in items {
        if let Some(d) = i.difficulty {
            let e = acc.entry(normalize_word(&i.target_word)).or_insert((0.0, 0));
            e.0 += d;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Pearson correlation of gold difficulty over target words shared by
/// each pair of L1s.
pub fn difficulty_correlations(splits: &BTreeMap<L1, Vec<KvlItem>>) -> Vec<PairCorrelation> {
    let golds: Vec<(L1, BTreeMap<String, f64>)> = splits.iter().map(|(l, items)| (*l, gold_by_word(items))).collect();
    let mut out = Vec::new();
    for i in 0..golds.len() {
        for j in i + 1..golds.len() {
            let (la, ga) = &golds[i];
            let (lb, gb) = &golds[j];
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                ga.iter().filter_map(|(w, &x)| gb.get(w).map(|&y| (x, y))).unzip();
            out.push(PairCorrelation {
                a: *la,
                b: *lb,
                n_shared: xs.len(),
                r: pearson(&xs, &ys),
            });
        }
    }
    out
}

pub fn numeric_features() -> Vec<Feature> {
    Feature::ALL.into_iter().filter(|f| !f.is_categorical()).collect()
}

/// Spearman ρ over rows where both values are present.
fn pairwise_spearman(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(p, q)| Some(((*p)?, (*q)?)))
        .unzip();
    spearman(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<Feature>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// Pairwise Spearman matrix over the numeric features (pairwise-complete
/// observations; `None` where a column is constant).
pub fn feature_correlation_matrix(rows: &[FeatureRow]) -> CorrelationMatrix {
    let features = numeric_features();
    let cols: Vec<Vec<Option<f64>>> = features
        .iter()
        .map(|&f| rows.iter().map(|r| r.get(f)).collect())
        .collect();
    let k = features.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = pairwise_spearman(&cols[i], &cols[j]);
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    CorrelationMatrix { features, values }
}

/// Spearman ρ between each numeric feature and gold difficulty.
pub fn feature_gold_spearman(rows: &[FeatureRow], gold: &[f64]) -> Vec<(Feature, Option<f64>)> {
    let g: Vec<Option<f64>> = gold.iter().map(|v| Some(*v)).collect();
    numeric_features()
        .into_iter()
        .map(|f| {
            let col: Vec<Option<f64>> = rows.iter().map(|r| r.get(f)).collect();
            (f, pairwise_spearman(&col, &g))
        })
        .collect()
}
