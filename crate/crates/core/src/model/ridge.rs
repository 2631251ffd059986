//! Closed-form ridge regression on standardized numeric features and
//! one-hot categorical levels.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{feature_schema_hash, ModelError, Preprocessor, Result};
use crate::corpus::L1;
use crate::features::{CharVectorizer, Feature, FeatureRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericTerm {
    pub feature: Feature,
    pub mean: f64,
    pub scale: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTerm {
    /// Training share of the level (the column mean used for centring).
    pub mean: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub feature_schema_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<L1>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectorizer: Option<CharVectorizer>,
    pub l2: f64,
    pub intercept: f64,
    pub preprocessor: Preprocessor,
    pub numeric: Vec<NumericTerm>,
    pub categorical: BTreeMap<Feature, BTreeMap<String, LevelTerm>>,
}

impl RidgeModel {
    pub fn predict(&self, row: &FeatureRow) -> f64 {
        let mut p = self.intercept;
        for t in &self.numeric {
            let x = self.preprocessor.impute(row, t.feature);
            p += t.weight * (x - t.mean) / t.scale;
        }
        for (f, levels) in &self.categorical {
            let level = row.category(*f).unwrap_or_default();
            for (name, t) in levels {
                let x = if name == level { 1.0 } else { 0.0 };
                p += t.weight * (x - t.mean);
            }
        }
        p
    }

    pub fn predict_many(&self, rows: &[FeatureRow]) -> Vec<f64> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn check_schema(&self) -> Result<()> {
        let expected = feature_schema_hash();
        if self.feature_schema_hash != expected {
            return Err(ModelError::SchemaMismatch {
                expected,
                found: self.feature_schema_hash.clone(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: RidgeModel = serde_json::from_str(text)?;
        m.check_schema()?;
        Ok(m)
    }
}

/// Fit `min ‖y − ȳ − Xw‖² + l2‖w‖²` with every column centred. Numeric
/// columns are scaled to unit (population) variance; constant columns are
/// dropped.
pub fn train_ridge(rows: &[FeatureRow], targets: &[f64], l2: f64) -> Result<RidgeModel> {
    if rows.len() != targets.len() {
        return Err(ModelError::LengthMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    if rows.len() < 2 {
        return Err(ModelError::TooFewRows(rows.len()));
    }
    if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteTarget(i));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(ModelError::InvalidConfig("l2 must be non-negative".into()));
    }
    let n = rows.len();
    let nf = n as f64;
    let pre = Preprocessor::fit(rows, targets, 0.0);
    let y_mean = targets.iter().sum::<f64>() / nf;

    let mut numeric = Vec::new();
    let mut numeric_cols: Vec<Vec<f64>> = Vec::new();
    for f in Feature::ALL.into_iter().filter(|f| !f.is_categorical()) {
        let col: Vec<f64> = rows.iter().map(|r| pre.impute(r, f)).collect();
        let mean = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
        if var <= 0.0 {
            continue;
        }
        let scale = var.sqrt();
        numeric_cols.push(col.iter().map(|v| (v - mean) / scale).collect());
        numeric.push(NumericTerm {
            feature: f,
            mean,
            scale,
            weight: 0.0,
        });
    }
    // One-hot columns: column index per (feature, level) and per-row indices.
    let mut level_cols: Vec<(Feature, String)> = Vec::new();
    let mut row_levels: Vec<Vec<usize>> = vec![Vec::new(); n];
    for f in Feature::ALL.into_iter().filter(|f| f.is_categorical()) {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for r in rows {
            index.entry(r.category(f).unwrap_or_default().to_string()).or_insert(0);
        }
        let offset = numeric.len() + level_cols.len();
        for (k, (name, slot)) in index.iter_mut().enumerate() {
            *slot = offset + k;
            level_cols.push((f, name.clone()));
        }
        for (i, r) in rows.iter().enumerate() {
            row_levels[i].push(index[r.category(f).unwrap_or_default()]);
        }
    }
    let p_num = numeric.len();
    let p = p_num + level_cols.len();

    // Accumulate the uncentred Gram matrix sparsely, then centre it.
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut col_mean = DVector::<f64>::zeros(p);
    for i in 0..n {
        let yc = targets[i] - y_mean;
        let mut nz: Vec<(usize, f64)> = (0..p_num).map(|j| (j, numeric_cols[j][i])).collect();
        nz.extend(row_levels[i].iter().map(|&j| (j, 1.0)));
        for &(a, va) in &nz {
            col_mean[a] += va / nf;
            xty[a] += va * yc;
            for &(b, vb) in &nz {
                gram[(a, b)] += va * vb;
            }
        }
    }
    for a in 0..p {
        for b in 0..p {
            gram[(a, b)] -= nf * col_mean[a] * col_mean[b];
        }
        gram[(a, a)] += l2;
    }
    let w = gram.cholesky().ok_or(ModelError::SingularSystem)?.solve(&xty);

    for (j, t) in numeric.iter_mut().enumerate() {
        t.weight = w[j];
    }
    let mut categorical: BTreeMap<Feature, BTreeMap<String, LevelTerm>> = BTreeMap::new();
    for (k, (f, name)) in level_cols.into_iter().enumerate() {
        let j = p_num + k;
        categorical.entry(f).or_default().insert(
            name,
            LevelTerm {
                mean: col_mean[j],
                weight: w[j],
            },
        );
    }
    Ok(RidgeModel {
        feature_schema_hash: feature_schema_hash(),
        l1: None,
        vectorizer: None,
        l2,
        intercept: y_mean,
        preprocessor: pre,
        numeric,
        categorical,
    })
}
