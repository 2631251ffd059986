//! Character n-gram TF-IDF vectors and cosine similarity between an English
//! word and its L1 translation.
//!
//! Words are documents and character n-grams (n = 2, 3, 4) are terms.
//! Weights are `(1 + ln tf) * ln(N / df)` with `N` the number of distinct
//! word forms the vectorizer was fitted on; vectors are L2-normalized.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::text::normalize_word;

pub const NGRAM_SIZES: [usize; 3] = [2, 3, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharVectorizer {
    /// n-gram → column index (columns follow lexicographic n-gram order).
    vocabulary: BTreeMap<String, usize>,
    /// Document frequency per column.
    df: Vec<u32>,
    n_docs: usize,
}

/// All n-grams of `word` with their term counts.
pub fn ngram_counts(word: &str) -> HashMap<String, u32> {
    let chars: Vec<char> = word.chars().collect();
    let mut counts = HashMap::new();
    for n in NGRAM_SIZES {
        if chars.len() < n {
            continue;
        }
        for w in chars.windows(n) {
            *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    counts
}

impl CharVectorizer {
    /// Fit on a set of training word forms (duplicates after normalization
    /// count once).
    pub fn fit<I, S>(forms: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut docs: Vec<String> = forms
            .into_iter()
            .map(|s| normalize_word(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        docs.sort();
        docs.dedup();
        if docs.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        let mut df: BTreeMap<String, u32> = BTreeMap::new();
        for d in &docs {
            for g in ngram_counts(d).into_keys() {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let vocabulary = df.keys().cloned().enumerate().map(|(i, g)| (g, i)).collect();
        Ok(CharVectorizer {
            vocabulary,
            df: df.into_values().collect(),
            n_docs: docs.len(),
        })
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    /// Document frequency of an n-gram, if it is in the vocabulary.
    pub fn df(&self, ngram: &str) -> Option<u32> {
        self.vocabulary.get(ngram).map(|&i| self.df[i])
    }

    pub fn idf(&self, ngram: &str) -> Option<f64> {
        self.df(ngram).map(|d| (self.n_docs as f64 / d as f64).ln())
    }

    /// L2-normalized sparse vector sorted by column; out-of-vocabulary
    /// n-grams are dropped. Empty when no weight is positive.
    pub fn transform(&self, word: &str) -> Vec<(usize, f64)> {
        let word = normalize_word(word);
        let mut v: Vec<(usize, f64)> = ngram_counts(&word)
            .into_iter()
            .filter_map(|(g, tf)| {
                let col = *self.vocabulary.get(&g)?;
                let idf = (self.n_docs as f64 / self.df[col] as f64).ln();
                let w = (1.0 + (tf as f64).ln()) * idf;
                (w > 0.0).then_some((col, w))
            })
            .collect();
        v.sort_unstable_by_key(|e| e.0);
        let norm = v.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut v {
                e.1 /= norm;
            }
        }
        v
    }

    /// Cosine similarity in [0, 1]; 0 when either vector is empty.
    pub fn similarity(&self, en_word: &str, l1_word: &str) -> f64 {
        let a = self.transform(en_word);
        if a.is_empty() {
            return 0.0;
        }
        if normalize_word(en_word) == normalize_word(l1_word) {
            return 1.0;
        }
        let b = self.transform(l1_word);
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        dot.clamp(0.0, 1.0)
    }
}
