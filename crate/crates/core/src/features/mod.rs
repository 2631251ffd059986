//! The 24 model features and the ablation-only extras.
//!
//! Column order of [`Feature::ALL`] is the order used everywhere: model
//! matrices, `features.csv`, attribution tables and the service payloads.

mod ablation;
mod charsim;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::{extract_ablation, AblationRow, CharUnigram, ABLATION_COLUMNS};
pub use charsim::{ngram_counts, CharVectorizer, NGRAM_SIZES};

use crate::corpus::{ConfusorPatterns, KvlItem};
use crate::resources::{normalize_sense_pos, Lookup, ResourceBundle};
use crate::text::{char_len, normalize_word, strip_annotations};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit a character vectorizer on an empty corpus")]
    EmptyCorpus,
    #[error("value outside the domain of {op}: {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Familiarity,
    Meaning,
    Surface,
    Transfer,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Familiarity,
        FeatureGroup::Meaning,
        FeatureGroup::Surface,
        FeatureGroup::Transfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Familiarity => "familiarity",
            FeatureGroup::Meaning => "meaning",
            FeatureGroup::Surface => "surface",
            FeatureGroup::Transfer => "transfer",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn features(self) -> impl Iterator<Item = Feature> {
        Feature::ALL.into_iter().filter(move |f| f.group() == self)
    }
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

pub const N_FEATURES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    LogFrequency,
    ContextualDiversity,
    AgeOfAcquisition,
    PercentKnown,
    CefrjLevel,
    EfllexSpan,
    EfllexA1,
    EfllexA2,
    EfllexB1,
    EfllexB2,
    EfllexC1,
    EmbeddingNorm,
    HypernymDepth,
    SenseCount,
    PosDominanceRatio,
    ConfusorFlag,
    TargetWordLength,
    SourceWordLength,
    SyllableCount,
    LettersPerPhoneme,
    ContextSentenceLength,
    ClueLetter,
    L1InitialLetter,
    CharSimilarity,
}

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::LogFrequency,
        Feature::ContextualDiversity,
        Feature::AgeOfAcquisition,
        Feature::PercentKnown,
        Feature::CefrjLevel,
        Feature::EfllexSpan,
        Feature::EfllexA1,
        Feature::EfllexA2,
        Feature::EfllexB1,
        Feature::EfllexB2,
        Feature::EfllexC1,
        Feature::EmbeddingNorm,
        Feature::HypernymDepth,
        Feature::SenseCount,
        Feature::PosDominanceRatio,
        Feature::ConfusorFlag,
        Feature::TargetWordLength,
        Feature::SourceWordLength,
        Feature::SyllableCount,
        Feature::LettersPerPhoneme,
        Feature::ContextSentenceLength,
        Feature::ClueLetter,
        Feature::L1InitialLetter,
        Feature::CharSimilarity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::LogFrequency => "log_frequency",
            Feature::ContextualDiversity => "contextual_diversity",
            Feature::AgeOfAcquisition => "age_of_acquisition",
            Feature::PercentKnown => "percent_known",
            Feature::CefrjLevel => "cefrj_level",
            Feature::EfllexSpan => "efllex_span",
            Feature::EfllexA1 => "efllex_a1",
            Feature::EfllexA2 => "efllex_a2",
            Feature::EfllexB1 => "efllex_b1",
            Feature::EfllexB2 => "efllex_b2",
            Feature::EfllexC1 => "efllex_c1",
            Feature::EmbeddingNorm => "embedding_norm",
            Feature::HypernymDepth => "hypernym_depth",
            Feature::SenseCount => "sense_count",
            Feature::PosDominanceRatio => "pos_dominance_ratio",
            Feature::ConfusorFlag => "confusor_flag",
            Feature::TargetWordLength => "target_word_length",
            Feature::SourceWordLength => "source_word_length",
            Feature::SyllableCount => "syllable_count",
            Feature::LettersPerPhoneme => "letters_per_phoneme",
            Feature::ContextSentenceLength => "context_sentence_length",
            Feature::ClueLetter => "clue_letter",
            Feature::L1InitialLetter => "l1_initial_letter",
            Feature::CharSimilarity => "char_similarity",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn group(self) -> FeatureGroup {
        match self.index() {
            0..=10 => FeatureGroup::Familiarity,
            11..=15 => FeatureGroup::Meaning,
            16..=22 => FeatureGroup::Surface,
            _ => FeatureGroup::Transfer,
        }
    }

    pub fn kind(self) -> FeatureKind {
        match self {
            Feature::ClueLetter | Feature::L1InitialLetter => FeatureKind::Categorical,
            _ => FeatureKind::Numeric,
        }
    }

    pub fn is_categorical(self) -> bool {
        self.kind() == FeatureKind::Categorical
    }
}

impl std::fmt::Display for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One item's features. Numeric slots hold `None` when the value must be
/// imputed downstream; categorical slots always hold `None` in `values`
/// and carry their level in `clue_letter` / `l1_initial_letter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub item_id: String,
    pub values: [Option<f64>; N_FEATURES],
    pub missing: [bool; N_FEATURES],
    pub clue_letter: String,
    pub l1_initial_letter: String,
}

impl FeatureRow {
    pub fn get(&self, f: Feature) -> Option<f64> {
        self.values[f.index()]
    }

    pub fn is_missing(&self, f: Feature) -> bool {
        self.missing[f.index()]
    }

    pub fn category(&self, f: Feature) -> Option<&str> {
        match f {
            Feature::ClueLetter => Some(&self.clue_letter),
            Feature::L1InitialLetter => Some(&self.l1_initial_letter),
            _ => None,
        }
    }

    fn set(&mut self, f: Feature, value: Option<f64>, missing: bool) {
        self.values[f.index()] = value;
        self.missing[f.index()] = missing;
    }
}

/// `log10(fpmw) + 3`; zero, negative and non-finite inputs are outside the
/// domain.
pub fn zipf(fpmw: f64) -> Result<f64> {
    if !(fpmw > 0.0 && fpmw.is_finite()) {
        return Err(FeatureError::Domain { op: "zipf", value: fpmw });
    }
    Ok(fpmw.log10() + 3.0)
}

/// Zipf value with the floor rule for unseen words: returns the value and
/// whether it was substituted.
pub fn zipf_frequency(fpmw: Option<f64>, f_min: f64) -> (f64, bool) {
    match fpmw.map(zipf) {
        Some(Ok(z)) => (z, false),
        _ => (f_min - 0.5, true),
    }
}

pub fn efllex_span(bands: &[f64; 5]) -> u32 {
    bands.iter().filter(|&&b| b > 0.0).count() as u32
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate. A final `e` after a consonant is treated
/// as silent except in a consonant + `le` ending (`ta-ble`).
pub fn syllable_count(word: &str) -> u32 {
    let w: Vec<char> = word
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let mut groups = 0u32;
    let mut prev_vowel = false;
    for &c in &w {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = w.len();
    if n >= 2 && w[n - 1] == 'e' && !is_vowel(w[n - 2]) {
        let consonant_le = w[n - 2] == 'l' && n >= 3 && !is_vowel(w[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

pub fn letters_per_phoneme(word: &str, n_phonemes: u32) -> Option<f64> {
    (n_phonemes >= 1).then(|| char_len(word) as f64 / n_phonemes as f64)
}

/// Share of the dominant POS among all tagged tokens; `None` when there are
/// no positive counts.
pub fn pos_dominance_ratio<'a>(counts: impl IntoIterator<Item = &'a f64>) -> Option<f64> {
    let (mut max, mut total) = (0.0f64, 0.0f64);
    for &c in counts {
        max = max.max(c);
        total += c;
    }
    (total > 0.0).then(|| max / total)
}

/// The L1 source word without bracketed annotations, normalized for
/// comparison. Falls back to the whole normalized string when stripping
/// leaves nothing.
pub fn clean_source_word(source: &str) -> String {
    let stripped = normalize_word(&strip_annotations(source));
    if stripped.is_empty() {
        normalize_word(source)
    } else {
        stripped
    }
}

fn first_char_lower(s: &str) -> String {
    s.chars().next().map(|c| c.to_lowercase().collect()).unwrap_or_default()
}

/// Compute all 24 features. Resource misses never fail; they become
/// missing flags, with the frequency floor and a zero EFLLex span as the
/// only substituted values.
pub fn extract_features(
    item: &KvlItem,
    bundle: &ResourceBundle,
    vectorizer: &CharVectorizer,
    confusors: &ConfusorPatterns,
) -> FeatureRow {
    use Feature as F;
    let target = normalize_word(&item.target_word);
    let source = clean_source_word(&item.source_word);
    let mut row = FeatureRow {
        item_id: item.item_id.clone(),
        values: [None; N_FEATURES],
        missing: [false; N_FEATURES],
        clue_letter: item.clue_letter.to_lowercase().collect(),
        l1_initial_letter: first_char_lower(&source),
    };
    let opt = |row: &mut FeatureRow, f: Feature, v: Option<f64>| row.set(f, v, v.is_none());

    let freq = bundle.frequency(&target);
    match (&freq, bundle.frequency.as_ref().and_then(|n| n.min_zipf())) {
        (_, None) => opt(&mut row, F::LogFrequency, None),
        (l, Some(f_min)) => {
            let fpmw = if let Lookup::Found(e) = l { Some(e.fpmw) } else { None };
            let (z, substituted) = zipf_frequency(fpmw, f_min);
            row.set(F::LogFrequency, Some(z), substituted);
        }
    }
    let freq = freq.found();
    opt(&mut row, F::ContextualDiversity, freq.map(|e| e.cd_proportion));
    opt(
        &mut row,
        F::PosDominanceRatio,
        freq.and_then(|e| pos_dominance_ratio(e.pos_counts.values())),
    );

    let aoa = bundle.aoa(&target).found();
    opt(&mut row, F::AgeOfAcquisition, aoa.map(|a| a.aoa_mean));
    opt(&mut row, F::PercentKnown, aoa.map(|a| a.percent_known));
    opt(
        &mut row,
        F::LettersPerPhoneme,
        aoa.and_then(|a| letters_per_phoneme(&target, a.n_phonemes)),
    );
    opt(&mut row, F::CefrjLevel, bundle.cefr(&target).found().map(f64::from));

    let bands = bundle.efllex(&target).found();
    let span = bands.map(efllex_span).unwrap_or(0);
    row.set(F::EfllexSpan, Some(span as f64), span == 0);
    for (i, f) in [F::EfllexA1, F::EfllexA2, F::EfllexB1, F::EfllexB2, F::EfllexC1]
        .into_iter()
        .enumerate()
    {
        opt(&mut row, f, bands.map(|b| b[i]));
    }

    opt(&mut row, F::EmbeddingNorm, bundle.embedding_norm(&target).found());
    let pos = normalize_sense_pos(&item.source_pos);
    let senses = bundle.senses(&target, Some(&pos)).found();
    opt(&mut row, F::HypernymDepth, senses.map(|s| s.mean_hypernym_depth));
    opt(&mut row, F::SenseCount, senses.map(|s| s.sense_count as f64));

    let confusor = confusors.confusor_flag(item);
    row.set(F::ConfusorFlag, Some(if confusor { 1.0 } else { 0.0 }), false);
    row.set(F::TargetWordLength, Some(char_len(&target) as f64), false);
    row.set(F::SourceWordLength, Some(char_len(&source) as f64), false);
    row.set(F::SyllableCount, Some(syllable_count(&target) as f64), false);
    row.set(
        F::ContextSentenceLength,
        Some(char_len(&item.context_sentence) as f64),
        false,
    );
    row.set(
        F::CharSimilarity,
        Some(vectorizer.similarity(&target, &source)),
        false,
    );
    row
}

/// Fit the vectorizer on the union of training targets and cleaned source
/// words.
pub fn fit_vectorizer_on_items(items: &[KvlItem]) -> Result<CharVectorizer> {
    CharVectorizer::fit(
        items
            .iter()
            .flat_map(|i| [normalize_word(&i.target_word), clean_source_word(&i.source_word)]),
    )
}

/// Header of `features.csv`: `item_id`, the 24 features in [`Feature::ALL`]
/// order, then `missing_<name>` for each numeric feature.
pub fn features_csv_header() -> Vec<String> {
    let mut h = vec!["item_id".to_string()];
    h.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    h.extend(
        Feature::ALL
            .iter()
            .filter(|f| !f.is_categorical())
            .map(|f| format!("missing_{}", f.name())),
    );
    h
}

pub fn write_features_csv<W: Write>(rows: &[FeatureRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(features_csv_header())?;
    for r in rows {
        let mut rec = vec![r.item_id.clone()];
        for f in Feature::ALL {
            rec.push(match r.category(f) {
                Some(c) => c.to_string(),
                None => r.get(f).map(|v| v.to_string()).unwrap_or_default(),
            });
        }
        for f in Feature::ALL.iter().filter(|f| !f.is_categorical()) {
            rec.push(u8::from(r.is_missing(*f)).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: std::io::Read>(input: R) -> Result<Vec<FeatureRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let expected = features_csv_header();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(FeatureError::Invalid("unexpected features.csv header".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut row = FeatureRow {
            item_id: rec[0].to_string(),
            values: [None; N_FEATURES],
            missing: [false; N_FEATURES],
            clue_letter: String::new(),
            l1_initial_letter: String::new(),
        };
        for (k, f) in Feature::ALL.into_iter().enumerate() {
            let cell = &rec[k + 1];
            match f {
                Feature::ClueLetter => row.clue_letter = cell.to_string(),
                Feature::L1InitialLetter => row.l1_initial_letter = cell.to_string(),
                _ if cell.is_empty() => {}
                _ => {
                    row.values[f.index()] = Some(cell.parse().map_err(|_| {
                        FeatureError::Invalid(format!("bad value `{cell}` for {f}"))
                    })?)
                }
            }
        }
        for (k, f) in Feature::ALL.iter().filter(|f| !f.is_categorical()).enumerate() {
            row.missing[f.index()] = &rec[N_FEATURES + 1 + k] == "1";
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_sizes() {
        let sizes: Vec<usize> = FeatureGroup::ALL.iter().map(|g| g.features().count()).collect();
        assert_eq!(sizes, vec![11, 5, 7, 1]);
        assert_eq!(Feature::ALL.iter().filter(|f| f.is_categorical()).count(), 2);
        for (i, f) in Feature::ALL.iter().enumerate() {
            assert_eq!(f.index(), i);
            assert_eq!(Feature::from_name(f.name()), Some(*f));
        }
    }

    #[test]
    fn zipf_values() {
        assert!((zipf(1000.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((zipf(1.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(zipf(0.0).is_err());
        let (z, m) = zipf_frequency(None, 1.59);
        assert!((z - 1.09).abs() < 1e-12 && m);
        let (z, m) = zipf_frequency(Some(0.0), 1.59);
        assert!((z - 1.09).abs() < 1e-12 && m);
    }

    #[test]
    fn span_examples() {
        assert_eq!(efllex_span(&[3.1, 2.0, 1.1, 0.5, 0.2]), 5);
        assert_eq!(efllex_span(&[0.0, 0.0, 0.4, 0.0, 0.0]), 1);
        assert_eq!(efllex_span(&[0.0; 5]), 0);
    }

    #[test]
    fn syllables() {
        assert_eq!(syllable_count("cable"), 2);
        assert_eq!(syllable_count("a"), 1);
        assert_eq!(syllable_count("thought"), 1);
        assert_eq!(syllable_count("make"), 1);
        assert_eq!(syllable_count("the"), 1);
        assert_eq!(syllable_count("rhythm"), 1);
        assert_eq!(syllable_count("banana"), 3);
    }

    #[test]
    fn lpp_and_dominance() {
        assert!((letters_per_phoneme("thought", 3).unwrap() - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(letters_per_phoneme("a", 1), Some(1.0));
        assert_eq!(letters_per_phoneme("cable", 4), Some(1.25));
        assert_eq!(letters_per_phoneme("cable", 0), None);
        assert_eq!(pos_dominance_ratio(&[90.0, 10.0]), Some(0.9));
        assert_eq!(pos_dominance_ratio(&[50.0]), Some(1.0));
        assert_eq!(pos_dominance_ratio(&[0.0]), None);
    }

    #[test]
    fn source_cleaning() {
        assert_eq!(clean_source_word("Kabel"), "kabel");
        assert_eq!(clean_source_word("etw entschlüsseln (nicht: decipher)"), "etw entschlüsseln");
        assert_eq!(clean_source_word("(x)"), "(x)");
    }
}
