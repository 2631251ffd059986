//! KVL vocabulary items: parsing, canonical serialization, and item-level
//! flags derived from the L1 prompt and the frequency norms.
//!
//! Canonical CSV columns:
//! `item_id,l1,source_word,source_pos,context_sentence,clue_letter,target_length,target_word,difficulty`.
//! Files with other headers go through a [`HeaderMapping`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resources::FrequencyNorms;
use crate::text::{char_len, normalize_word};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: PathBuf, column: String },
    #[error("{file}:{line}: {reason}")]
    RowParseError {
        file: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{file}: no valid items")]
    EmptySplit { file: PathBuf },
    #[error("unknown L1 `{0}` (expected es, de or zh)")]
    UnknownL1(String),
    #[error("invalid pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("CSV output failed: {0}")]
    Write(#[from] csv::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L1 {
    Es,
    De,
    Zh,
}

impl L1 {
    pub const ALL: [L1; 3] = [L1::Es, L1::De, L1::Zh];

    pub fn code(self) -> &'static str {
        match self {
            L1::Es => "es",
            L1::De => "de",
            L1::Zh => "zh",
        }
    }
}

impl fmt::Display for L1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for L1 {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "es" | "spanish" => Ok(L1::Es),
            "de" | "german" => Ok(L1::De),
            "zh" | "cn" | "chinese" => Ok(L1::Zh),
            other => Err(CorpusError::UnknownL1(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "development" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One vocabulary test item. Difficulty is a log-scale score where higher
/// means easier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KvlItem {
    pub item_id: String,
    pub l1: L1,
    pub source_word: String,
    pub source_pos: String,
    pub context_sentence: String,
    pub clue_letter: char,
    pub target_length: usize,
    pub target_word: String,
    pub difficulty: Option<f64>,
}

impl KvlItem {
    /// Build an item, deriving clue letter and length from the target.
    pub fn new(
        item_id: impl Into<String>,
        l1: L1,
        source_word: impl Into<String>,
        source_pos: impl Into<String>,
        context_sentence: impl Into<String>,
        target_word: impl Into<String>,
        difficulty: Option<f64>,
    ) -> Self {
        let target_word: String = target_word.into();
        KvlItem {
            item_id: item_id.into(),
            l1,
            source_word: source_word.into(),
            source_pos: source_pos.into(),
            context_sentence: context_sentence.into(),
            clue_letter: first_char_lower(&target_word).unwrap_or(' '),
            target_length: char_len(&target_word),
            target_word,
            difficulty,
        }
    }
}

fn first_char_lower(s: &str) -> Option<char> {
    s.trim().chars().next().map(|c| c.to_lowercase().next().unwrap_or(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KvlSplit {
    pub l1: L1,
    pub split: Split,
    pub items: Vec<KvlItem>,
}

/// Non-fatal row-level findings from parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u64,
    pub message: String,
    /// `true` when the row was dropped, `false` when it was repaired.
    pub rejected: bool,
}

pub const CANONICAL_COLUMNS: [&str; 9] = [
    "item_id",
    "l1",
    "source_word",
    "source_pos",
    "context_sentence",
    "clue_letter",
    "target_length",
    "target_word",
    "difficulty",
];

/// Maps foreign header names onto canonical column names. Loaded from a
/// TOML file with a `[columns]` table, e.g. `L1_word = "source_word"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeaderMapping {
    pub columns: BTreeMap<String, String>,
}

impl HeaderMapping {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    fn canonical<'a>(&'a self, header: &'a str) -> &'a str {
        self.columns
            .get(header)
            .or_else(|| {
                self.columns
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(header))
                    .map(|(_, v)| v)
            })
            .map_or(header, String::as_str)
    }
}

/// Parse a KVL CSV file. Rows that cannot be used are dropped with a
/// diagnostic; clue/length mismatches are repaired from `target_word`.
pub fn parse_kvl(
    path: &Path,
    l1: L1,
    split: Split,
    mapping: &HeaderMapping,
) -> Result<(KvlSplit, Vec<Diagnostic>)> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_kvl_reader(file, path, l1, split, mapping)
}

pub fn parse_kvl_reader(
    reader: impl Read,
    path: &Path,
    l1: L1,
    split: Split,
    mapping: &HeaderMapping,
) -> Result<(KvlSplit, Vec<Diagnostic>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| row_error(path, &e))?
        .clone();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim().trim_start_matches('\u{feff}');
        index.entry(mapping.canonical(h)).or_insert(i);
    }
    for required in ["source_word", "target_word"] {
        if !index.contains_key(required) {
            return Err(CorpusError::MissingColumn {
                file: path.to_path_buf(),
                column: required.into(),
            });
        }
    }

    let mut items = Vec::new();
    let mut diags = Vec::new();
    let mut seen_ids = HashSet::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| row_error(path, &e))?;
        let line = record.position().map_or(row_no as u64 + 2, |p| p.line());
        let get = |col: &str| index.get(col).and_then(|&i| record.get(i)).unwrap_or("");
        let reject = |diags: &mut Vec<Diagnostic>, message: String| {
            diags.push(Diagnostic {
                line,
                message,
                rejected: true,
            })
        };

        let target_word = get("target_word").trim().to_string();
        let source_word = get("source_word").trim().to_string();
        if target_word.is_empty() || source_word.is_empty() {
            reject(&mut diags, "empty source or target word".into());
            continue;
        }
        let row_l1 = get("l1");
        if !row_l1.trim().is_empty() {
            match row_l1.parse::<L1>() {
                Ok(x) if x == l1 => {}
                _ => {
                    reject(&mut diags, format!("row l1 `{row_l1}` does not match {l1}"));
                    continue;
                }
            }
        }
        let difficulty = match get("difficulty").trim() {
            "" => None,
            d => match d.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    reject(&mut diags, format!("difficulty `{d}` is not a finite number"));
                    continue;
                }
            },
        };
        let item_id = match get("item_id").trim() {
            "" => format!("{l1}-{split}-{}", row_no + 1),
            id => id.to_string(),
        };
        if !seen_ids.insert(item_id.clone()) {
            reject(&mut diags, format!("duplicate item_id `{item_id}`"));
            continue;
        }

        let mut item = KvlItem::new(
            item_id,
            l1,
            source_word,
            get("source_pos").trim(),
            get("context_sentence").trim(),
            target_word,
            difficulty,
        );
        let clue = get("clue_letter").trim();
        if !clue.is_empty() && first_char_lower(clue) != Some(item.clue_letter) {
            diags.push(Diagnostic {
                line,
                message: format!("clue `{clue}` does not start `{}`; repaired", item.target_word),
                rejected: false,
            });
        }
        let len = get("target_length").trim();
        if !len.is_empty() && len.parse::<usize>().ok() != Some(item.target_length) {
            diags.push(Diagnostic {
                line,
                message: format!("target_length `{len}` != |{}|; repaired", item.target_word),
                rejected: false,
            });
        }
        item.source_pos = item.source_pos.to_lowercase();
        items.push(item);
    }
    for d in &diags {
        log::warn!("{}:{}: {}", path.display(), d.line, d.message);
    }
    if items.is_empty() {
        return Err(CorpusError::EmptySplit {
            file: path.to_path_buf(),
        });
    }
    Ok((KvlSplit { l1, split, items }, diags))
}

fn row_error(path: &Path, e: &csv::Error) -> CorpusError {
    CorpusError::RowParseError {
        file: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        reason: e.to_string(),
    }
}

/// Write items in canonical column order.
pub fn write_kvl<W: Write>(items: &[KvlItem], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CANONICAL_COLUMNS)?;
    for it in items {
        let clue = it.clue_letter.to_string();
        let len = it.target_length.to_string();
        let diff = it.difficulty.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([
            it.item_id.as_str(),
            it.l1.code(),
            &it.source_word,
            &it.source_pos,
            &it.context_sentence,
            &clue,
            &len,
            &it.target_word,
            &diff,
        ])?;
    }
    w.flush().map_err(|e| CorpusError::Write(e.into()))?;
    Ok(())
}

/// Target words shared between splits of the same L1, per split pair.
pub fn split_overlaps(splits: &[&KvlSplit]) -> Vec<(Split, Split, Vec<String>)> {
    let mut out = Vec::new();
    for (i, a) in splits.iter().enumerate() {
        for b in &splits[i + 1..] {
            if a.l1 != b.l1 {
                continue;
            }
            let words: HashSet<String> = a.items.iter().map(|x| normalize_word(&x.target_word)).collect();
            let mut shared: Vec<String> = b
                .items
                .iter()
                .map(|x| normalize_word(&x.target_word))
                .filter(|w| words.contains(w))
                .collect::<HashSet<_>>()
                .into_iter()
                .collect();
            shared.sort();
            if !shared.is_empty() {
                out.push((a.split, b.split, shared));
            }
        }
    }
    out
}

/// Per-L1 regexes that mark a disambiguation annotation in the L1 prompt.
#[derive(Debug, Clone)]
pub struct ConfusorPatterns {
    patterns: BTreeMap<L1, Vec<Regex>>,
}

impl Default for ConfusorPatterns {
    fn default() -> Self {
        let shared = r"[(\[（【]\s*(?i:not)\s*[:：]";
        let build = |specific: &str| {
            vec![Regex::new(specific).unwrap(), Regex::new(shared).unwrap()]
        };
        let mut patterns = BTreeMap::new();
        patterns.insert(L1::De, build(r"[(\[（【]\s*(?i:nicht)\s*[:：]"));
        patterns.insert(L1::Es, build(r"[(\[（【]\s*(?i:no)\s*[:：]"));
        patterns.insert(L1::Zh, build(r"[(\[（【]\s*(非|不是)"));
        ConfusorPatterns { patterns }
    }
}

impl ConfusorPatterns {
    /// Replace the defaults with user-supplied regex lists.
    pub fn from_lists(lists: &BTreeMap<L1, Vec<String>>) -> Result<Self> {
        let mut out = ConfusorPatterns::default();
        for (l1, pats) in lists {
            let compiled = pats.iter().map(|p| Regex::new(p)).collect::<Result<Vec<_>, _>>()?;
            out.patterns.insert(*l1, compiled);
        }
        Ok(out)
    }

    /// True iff the source word or context carries a disambiguator.
    pub fn confusor_flag(&self, item: &KvlItem) -> bool {
        self.patterns.get(&item.l1).is_some_and(|pats| {
            pats.iter()
                .any(|re| re.is_match(&item.source_word) || re.is_match(&item.context_sentence))
        })
    }
}

/// Mapping from KVL POS tags onto the frequency-norms tagset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMap {
    map: HashMap<String, String>,
}

const DEFAULT_TAGMAP: &str = include_str!("../data/pos_tagmap.tsv");

impl Default for TagMap {
    fn default() -> Self {
        TagMap::parse(DEFAULT_TAGMAP).expect("bundled tag map is valid")
    }
}

impl TagMap {
    /// Two-column TSV with a header row: `kvl_pos<TAB>norms_pos`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| format!("line {}: expected two tab-separated columns", i + 1))?;
            map.insert(k.trim().to_lowercase(), v.trim().to_lowercase());
        }
        Ok(TagMap { map })
    }

    /// Unmapped tags pass through lowercased.
    pub fn map(&self, kvl_pos: &str) -> String {
        let k = kvl_pos.trim().to_lowercase();
        self.map.get(&k).cloned().unwrap_or(k)
    }
}

/// True iff the item's POS differs from the norms' dominant POS for the
/// target word; false when the word is missing from the norms.
pub fn pos_competition_flag(item: &KvlItem, freq: &FrequencyNorms, tags: &TagMap) -> bool {
    freq.get(&item.target_word)
        .and_then(|e| e.dominant_pos())
        .is_some_and(|dominant| tags.map(&item.source_pos) != dominant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::FrequencyEntry;

    fn parse(text: &str) -> Result<(KvlSplit, Vec<Diagnostic>)> {
        parse_kvl_reader(text.as_bytes(), Path::new("mem.csv"), L1::De, Split::Train, &HeaderMapping::default())
    }

    #[test]
    fn parses_and_repairs_clue() {
        let (s, d) = parse(
            "item_id,l1,source_word,source_pos,context_sentence,clue_letter,target_length,target_word,difficulty\n\
             1,de,Kabel,noun,Achtung!,c,5,cable,0.9\n\
             2,de,Kabel,noun,,x,5,cable,\n",
        )
        .unwrap();
        assert_eq!(s.items.len(), 2);
        assert_eq!(s.items[0].target_length, 5);
        assert_eq!(s.items[1].clue_letter, 'c');
        assert_eq!(s.items[1].difficulty, None);
        assert_eq!(d.len(), 1);
        assert!(!d[0].rejected);
    }

    #[test]
    fn missing_column_and_empty_split() {
        assert!(matches!(
            parse("item_id,source_word\n1,Kabel\n"),
            Err(CorpusError::MissingColumn { .. })
        ));
        assert!(matches!(
            parse("source_word,target_word\n,\n"),
            Err(CorpusError::EmptySplit { .. })
        ));
    }

    #[test]
    fn header_mapping_adapts_foreign_schema() {
        let mapping = HeaderMapping::from_toml("[columns]\nL1_lemma = \"source_word\"\nen_target = \"target_word\"\nGLMM_score = \"difficulty\"\n").unwrap();
        let (s, _) = parse_kvl_reader(
            "L1_lemma,en_target,GLMM_score\nKabel,cable,0.9\n".as_bytes(),
            Path::new("x.csv"),
            L1::De,
            Split::Dev,
            &mapping,
        )
        .unwrap();
        assert_eq!(s.items[0].target_word, "cable");
        assert_eq!(s.items[0].item_id, "de-dev-1");
        assert_eq!(s.items[0].difficulty, Some(0.9));
    }

    #[test]
    fn canonical_write_is_byte_stable() {
        let (s, _) = parse(
            "item_id,l1,source_word,source_pos,context_sentence,clue_letter,target_length,target_word,difficulty\n\
             a,de,\"etw entschlüsseln (nicht: decipher)\",verb,\"Er kann, sagt sie, den Code nicht.\",d,6,decode,-1.25\n\
             b,de,Kabel,noun,,c,5,cable,0.9\n",
        )
        .unwrap();
        let mut first = Vec::new();
        write_kvl(&s.items, &mut first).unwrap();
        let (again, _) = parse(std::str::from_utf8(&first).unwrap()).unwrap();
        let mut second = Vec::new();
        write_kvl(&again.items, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(again, s);
    }

    #[test]
    fn confusor_defaults() {
        let p = ConfusorPatterns::default();
        let de = KvlItem::new("1", L1::De, "etw entschlüsseln (nicht: decipher)", "verb", "", "decode", None);
        assert!(p.confusor_flag(&de));
        let plain = KvlItem::new("2", L1::De, "Kabel", "noun", "", "cable", None);
        assert!(!p.confusor_flag(&plain));
        let es = KvlItem::new("3", L1::Es, "banco (no: bench)", "noun", "", "bank", None);
        assert!(p.confusor_flag(&es));
        let zh = KvlItem::new("4", L1::Zh, "银行（非：长椅）", "noun", "", "bank", None);
        assert!(p.confusor_flag(&zh));
        // A German pattern must not fire for a Spanish item.
        let es_nicht = KvlItem::new("5", L1::Es, "x (nicht: y)", "noun", "", "bank", None);
        assert!(!p.confusor_flag(&es_nicht));
    }

    #[test]
    fn pos_competition() {
        let freq = FrequencyNorms::from_entries([
            (
                "received".to_string(),
                FrequencyEntry {
                    fpmw: 40.0,
                    cd_proportion: 0.3,
                    pos_counts: [("verb".to_string(), 900.0), ("adjective".to_string(), 30.0)].into(),
                },
            ),
            (
                "cable".to_string(),
                FrequencyEntry {
                    fpmw: 12.0,
                    cd_proportion: 0.2,
                    pos_counts: [("noun".to_string(), 5124.0), ("verb".to_string(), 310.0)].into(),
                },
            ),
        ]);
        let tags = TagMap::default();
        let rec = KvlItem::new("1", L1::Es, "aceptado", "adj", "", "received", None);
        assert!(pos_competition_flag(&rec, &freq, &tags));
        let cable = KvlItem::new("2", L1::Es, "cable", "noun", "", "cable", None);
        assert!(!pos_competition_flag(&cable, &freq, &tags));
        let absent = KvlItem::new("3", L1::Es, "x", "noun", "", "zzzzq", None);
        assert!(!pos_competition_flag(&absent, &freq, &tags));
    }

    #[test]
    fn overlaps_are_reported() {
        let a = KvlSplit { l1: L1::Es, split: Split::Train, items: vec![KvlItem::new("1", L1::Es, "x", "noun", "", "cable", None)] };
        let b = KvlSplit { l1: L1::Es, split: Split::Test, items: vec![KvlItem::new("2", L1::Es, "x", "noun", "", "Cable", None)] };
        let o = split_overlaps(&[&a, &b]);
        assert_eq!(o, vec![(Split::Train, Split::Test, vec!["cable".to_string()])]);
    }
}
