//! Training-fold statistics that turn a [`FeatureRow`] into a dense numeric
//! vector: median imputation and smoothed target-mean encoding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::{Feature, FeatureRow, N_FEATURES};
use crate::stats::median;

/// `enc(c) = (Σ y over c + a·ȳ) / (n_c + a)`; unseen levels map to `ȳ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEncoder {
    pub prior: f64,
    pub smoothing: f64,
    pub values: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
}

impl CategoryEncoder {
    pub fn fit<'a>(levels: impl IntoIterator<Item = &'a str>, targets: &[f64], smoothing: f64) -> Self {
        let prior = targets.iter().sum::<f64>() / targets.len() as f64;
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for (level, &y) in levels.into_iter().zip(targets) {
            let e = acc.entry(level.to_string()).or_insert((0.0, 0));
            e.0 += y;
            e.1 += 1;
        }
        let values = acc
            .iter()
            .map(|(k, &(sum, n))| (k.clone(), (sum + smoothing * prior) / (n as f64 + smoothing)))
            .collect();
        let counts = acc.into_iter().map(|(k, (_, n))| (k, n)).collect();
        CategoryEncoder {
            prior,
            smoothing,
            values,
            counts,
        }
    }

    pub fn encode(&self, level: &str) -> f64 {
        self.values.get(level).copied().unwrap_or(self.prior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    /// Training medians per feature (0 for categorical slots).
    pub medians: Vec<f64>,
    pub clue_letter: CategoryEncoder,
    pub l1_initial_letter: CategoryEncoder,
}

impl Preprocessor {
    pub fn fit(rows: &[FeatureRow], targets: &[f64], cat_smoothing: f64) -> Self {
        let medians = Feature::ALL
            .iter()
            .map(|&f| {
                if f.is_categorical() {
                    return 0.0;
                }
                let present: Vec<f64> = rows.iter().filter_map(|r| r.get(f)).collect();
                median(&present).unwrap_or_else(|| {
                    log::warn!("feature {f} is missing for every training row; imputing 0");
                    0.0
                })
            })
            .collect();
        Preprocessor {
            medians,
            clue_letter: CategoryEncoder::fit(rows.iter().map(|r| r.clue_letter.as_str()), targets, cat_smoothing),
            l1_initial_letter: CategoryEncoder::fit(
                rows.iter().map(|r| r.l1_initial_letter.as_str()),
                targets,
                cat_smoothing,
            ),
        }
    }

    pub fn transform(&self, row: &FeatureRow) -> [f64; N_FEATURES] {
        let mut x = [0.0; N_FEATURES];
        for f in Feature::ALL {
            let i = f.index();
            x[i] = match f {
                Feature::ClueLetter => self.clue_letter.encode(&row.clue_letter),
                Feature::L1InitialLetter => self.l1_initial_letter.encode(&row.l1_initial_letter),
                _ => row.values[i].unwrap_or(self.medians[i]),
            };
        }
        x
    }

    /// Numeric value with imputation but without categorical encoding.
    pub fn impute(&self, row: &FeatureRow, f: Feature) -> f64 {
        row.get(f).unwrap_or(self.medians[f.index()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_encoding() {
        let e = CategoryEncoder::fit(["a", "a", "b"], &[1.0, 3.0, 5.0], 10.0);
        assert!((e.prior - 3.0).abs() < 1e-12);
        assert!((e.encode("a") - (4.0 + 30.0) / 12.0).abs() < 1e-12);
        assert!((e.encode("b") - (5.0 + 30.0) / 11.0).abs() < 1e-12);
        assert_eq!(e.encode("zz"), 3.0);
    }
}
