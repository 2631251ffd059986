//! Features evaluated on the development set but left out of the final
//! model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::clean_source_word;
use crate::corpus::KvlItem;
use crate::resources::{normalize_sense_pos, ResourceBundle};
use crate::text::{char_len, lcs_len, levenshtein, normalize_word};

pub const ABLATION_COLUMNS: [&str; 8] = [
    "char_surprisal",
    "edit_distance_norm",
    "lcs_ratio_en",
    "lcs_ratio_l1",
    "efllex_entropy",
    "efllex_mean_level",
    "wn_synonym_count",
    "exact_match",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub item_id: String,
    pub char_surprisal: Option<f64>,
    pub edit_distance_norm: Option<f64>,
    pub lcs_ratio_en: Option<f64>,
    pub lcs_ratio_l1: Option<f64>,
    pub efllex_entropy: Option<f64>,
    pub efllex_mean_level: Option<f64>,
    pub wn_synonym_count: Option<f64>,
    pub exact_match: f64,
}

impl AblationRow {
    /// Values in [`ABLATION_COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 8] {
        [
            self.char_surprisal,
            self.edit_distance_norm,
            self.lcs_ratio_en,
            self.lcs_ratio_l1,
            self.efllex_entropy,
            self.efllex_mean_level,
            self.wn_synonym_count,
            Some(self.exact_match),
        ]
    }
}

/// Add-one smoothed character unigram distribution over training targets.
/// One extra slot holds the mass for characters never seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharUnigram {
    counts: HashMap<char, u64>,
    total: u64,
}

impl CharUnigram {
    pub fn fit<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts = HashMap::new();
        let mut total = 0;
        for w in words {
            for c in normalize_word(w.as_ref()).chars() {
                *counts.entry(c).or_insert(0) += 1;
                total += 1;
            }
        }
        CharUnigram { counts, total }
    }

    pub fn prob(&self, c: char) -> f64 {
        let denom = (self.total + self.counts.len() as u64 + 1) as f64;
        (self.counts.get(&c).copied().unwrap_or(0) + 1) as f64 / denom
    }

    /// Mean of `-ln p(c)` over the characters of `word`.
    pub fn surprisal(&self, word: &str) -> Option<f64> {
        let w = normalize_word(word);
        let n = char_len(&w);
        (n > 0).then(|| w.chars().map(|c| -self.prob(c).ln()).sum::<f64>() / n as f64)
    }
}

/// Shannon entropy of the band distribution divided by `ln 5`.
pub fn efllex_entropy(bands: &[f64; 5]) -> Option<f64> {
    let total: f64 = bands.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let h: f64 = bands
        .iter()
        .filter(|&&b| b > 0.0)
        .map(|&b| {
            let p = b / total;
            -p * p.ln()
        })
        .sum();
    Some((h / 5f64.ln()).clamp(0.0, 1.0))
}

/// Frequency-weighted mean level with A1 = 1 … C1 = 5.
pub fn efllex_mean_level(bands: &[f64; 5]) -> Option<f64> {
    let total: f64 = bands.iter().sum();
    (total > 0.0).then(|| {
        bands
            .iter()
            .enumerate()
            .map(|(i, b)| (i + 1) as f64 * b)
            .sum::<f64>()
            / total
    })
}

pub fn extract_ablation(item: &KvlItem, bundle: &ResourceBundle, unigram: &CharUnigram) -> AblationRow {
    let en = normalize_word(&item.target_word);
    let l1 = clean_source_word(&item.source_word);
    let (len_en, len_l1) = (char_len(&en), char_len(&l1));
    let both = len_en > 0 && len_l1 > 0;
    let lcs = lcs_len(&en, &l1) as f64;
    let bands = bundle.efllex(&en).found();
    let pos = normalize_sense_pos(&item.source_pos);
    AblationRow {
        item_id: item.item_id.clone(),
        char_surprisal: unigram.surprisal(&en),
        edit_distance_norm: both.then(|| {
            levenshtein(&en, &l1) as f64 / ((len_en as f64).sqrt() * (len_l1 as f64).sqrt())
        }),
        lcs_ratio_en: (len_en > 0).then(|| lcs / len_en as f64),
        lcs_ratio_l1: (len_l1 > 0).then(|| lcs / len_l1 as f64),
        efllex_entropy: bands.and_then(efllex_entropy),
        efllex_mean_level: bands.and_then(efllex_mean_level),
        wn_synonym_count: bundle
            .senses(&en, Some(&pos))
            .found()
            .and_then(|s| s.synonym_count)
            .map(f64::from),
        exact_match: if en == l1 { 1.0 } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::L1;

    fn item(src: &str, tgt: &str) -> KvlItem {
        KvlItem::new("x", L1::De, src, "noun", "", tgt, None)
    }

    #[test]
    fn identical_pair() {
        let u = CharUnigram::fit(["cable"]);
        let r = extract_ablation(&item("cable", "cable"), &ResourceBundle::default(), &u);
        assert_eq!(r.edit_distance_norm, Some(0.0));
        assert_eq!(r.lcs_ratio_en, Some(1.0));
        assert_eq!(r.lcs_ratio_l1, Some(1.0));
        assert_eq!(r.exact_match, 1.0);
        assert_eq!(r.efllex_entropy, None);
    }

    #[test]
    fn cable_kabel() {
        let u = CharUnigram::fit(["cable"]);
        let r = extract_ablation(&item("Kabel", "cable"), &ResourceBundle::default(), &u);
        // Plain Levenshtein is 3 (c→k plus two edits for le→el).
        assert!((r.edit_distance_norm.unwrap() - 0.6).abs() < 1e-12);
        assert!((r.lcs_ratio_en.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(r.exact_match, 0.0);
    }

    #[test]
    fn entropy_and_level() {
        assert!((efllex_entropy(&[1.0; 5]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(efllex_entropy(&[0.0, 0.0, 2.0, 0.0, 0.0]), Some(0.0));
        assert_eq!(efllex_entropy(&[0.0; 5]), None);
        assert_eq!(efllex_mean_level(&[1.0, 0.0, 0.0, 0.0, 1.0]), Some(3.0));
        // Entropy ignores the band order, the mean level does not.
        let a = [4.0, 1.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 1.0, 4.0];
        assert!((efllex_entropy(&a).unwrap() - efllex_entropy(&b).unwrap()).abs() < 1e-12);
        assert_ne!(efllex_mean_level(&a), efllex_mean_level(&b));
    }

    #[test]
    fn surprisal_smoothing() {
        let u = CharUnigram::fit(["aab"]);
        // counts a:2 b:1, total 3, 2 types + 1 unseen slot → denominator 6
        assert!((u.prob('a') - 0.5).abs() < 1e-12);
        assert!((u.prob('z') - 1.0 / 6.0).abs() < 1e-12);
        let s = u.surprisal("ab").unwrap();
        assert!((s - (-(0.5f64).ln() - (2.0f64 / 6.0).ln()) / 2.0).abs() < 1e-12);
    }
}
