//! Gradient-boosted regression trees and the ridge baseline.

mod binning;
mod gbdt;
mod preprocess;
mod ridge;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use binning::{bin_of, fit_cuts};
pub use gbdt::{fit_dense, train_gbdt, DenseFit};
pub use preprocess::{CategoryEncoder, Preprocessor};
pub use ridge::{train_ridge, RidgeModel};

use crate::corpus::L1;
use crate::features::{CharVectorizer, Feature, FeatureRow, N_FEATURES};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("target at row {0} is not finite")]
    NonFiniteTarget(usize),
    #[error("feature schema mismatch: model has {found}, this build expects {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("ridge system is singular")]
    SingularSystem,
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// SHA-256 over the ordered feature layout (name, group, kind).
pub fn feature_schema_hash() -> String {
    let mut h = Sha256::new();
    for f in Feature::ALL {
        let kind = if f.is_categorical() { "categorical" } else { "numeric" };
        h.update(format!("{}:{}:{}\n", f.name(), f.group().name(), kind).as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbdtConfig {
    pub tree_depth: usize,
    pub learning_rate: f64,
    pub n_iterations: usize,
    pub l2_leaf_reg: f64,
    pub seed: u64,
    pub max_bins: usize,
    pub cat_smoothing: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            tree_depth: 7,
            learning_rate: 0.017,
            n_iterations: 2400,
            l2_leaf_reg: 0.8,
            seed: 1,
            max_bins: 255,
            cat_smoothing: 10.0,
            min_samples_leaf: 10,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.tree_depth < 1 || self.tree_depth > 16 {
            return bad("tree_depth must be in 1..=16");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_leaf_reg >= 0.0 && self.l2_leaf_reg.is_finite()) {
            return bad("l2_leaf_reg must be non-negative");
        }
        if !(2..=256).contains(&self.max_bins) {
            return bad("max_bins must be in 2..=256");
        }
        if !(self.cat_smoothing >= 0.0 && self.cat_smoothing.is_finite()) {
            return bad("cat_smoothing must be non-negative");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    /// Rows with `x <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Branch taken for a missing (NaN) value: the child with larger cover.
    pub default_left: bool,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Raw leaf value `Σ residual / (n + λ)`, before the learning rate.
    /// Internal nodes keep the value they would have had as a leaf.
    pub value: f64,
    /// Number of training rows reaching the node.
    pub cover: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = next_child_index(s, x[s.feature]);
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        let root = self.nodes[0].cover;
        self.nodes
            .iter()
            .filter(|n| n.split.is_none())
            .map(|n| n.value * n.cover / root)
            .sum()
    }
}

pub fn next_child_index(s: &SplitRule, v: f64) -> usize {
    if v.is_nan() {
        if s.default_left {
            s.left
        } else {
            s.right
        }
    } else if v <= s.threshold {
        s.left
    } else {
        s.right
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub n_rows: usize,
    pub target_min: f64,
    pub target_max: f64,
    pub train_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub format_version: u32,
    pub feature_schema_hash: String,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<L1>,
    pub config: GbdtConfig,
    pub base_score: f64,
    pub learning_rate: f64,
    pub preprocessor: Preprocessor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectorizer: Option<CharVectorizer>,
    pub summary: TrainingSummary,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn check_schema(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(self.format_version));
        }
        let expected = feature_schema_hash();
        if self.feature_schema_hash != expected {
            return Err(ModelError::SchemaMismatch {
                expected,
                found: self.feature_schema_hash.clone(),
            });
        }
        Ok(())
    }

    pub fn transform(&self, row: &FeatureRow) -> [f64; N_FEATURES] {
        self.preprocessor.transform(row)
    }

    /// Prediction on an already transformed vector.
    pub fn predict_dense(&self, x: &[f64]) -> f64 {
        let mut p = self.base_score;
        for t in &self.trees {
            p += self.learning_rate * t.predict(x);
        }
        p
    }

    pub fn predict(&self, row: &FeatureRow) -> Result<f64> {
        self.check_schema()?;
        Ok(self.predict_dense(&self.transform(row)))
    }

    pub fn predict_many(&self, rows: &[FeatureRow]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        self.check_schema()?;
        Ok(rows
            .par_iter()
            .map(|r| self.predict_dense(&self.transform(r)))
            .collect())
    }

    /// Mean training prediction: the base of every attribution.
    pub fn expected_value(&self) -> f64 {
        let mut e = self.base_score;
        for t in &self.trees {
            e += self.learning_rate * t.expected_value();
        }
        e
    }

    /// Bound on how far any prediction can move away from `base_score`.
    pub fn max_abs_offset(&self) -> f64 {
        self.trees
            .iter()
            .map(|t| {
                t.nodes
                    .iter()
                    .filter(|n| n.split.is_none())
                    .map(|n| n.value.abs())
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            * self.learning_rate
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TreeEnsemble = serde_json::from_str(text)?;
        m.check_schema()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
