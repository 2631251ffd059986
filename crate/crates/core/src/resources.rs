//! Lexical resources: frequency norms, age-of-acquisition norms, CEFR levels,
//! learner-corpus level frequencies, embedding norms, and sense statistics.
//!
//! Every resource is a UTF-8 TSV with a header row. Columns are matched by
//! name (case-insensitive), unknown columns are ignored, and duplicate words
//! keep their first occurrence. Words are keyed by [`normalize_word`].
//!
//! | file | columns |
//! |------|---------|
//! | `frequency.tsv` | `word, fpmw, cd_proportion, pos_counts` (`noun:5124;verb:310`) |
//! | `aoa.tsv` | `word, aoa_mean, percent_known, n_phonemes` |
//! | `cefr.tsv` | `word, level` (`A1`..`C2`) |
//! | `efllex.tsv` | `word, freq_a1, freq_a2, freq_b1, freq_b2, freq_c1` |
//! | `embedding_norms.tsv` | `word, l2_norm` (or `embeddings.txt`: word + floats) |
//! | `senses.tsv` | `word, pos, sense_count, mean_hypernym_depth` (optional `synonym_count`) |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::normalize_word;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed row: {reason}")]
    MalformedRow {
        file: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{file}: missing required column `{column}`")]
    MissingRequiredColumn { file: PathBuf, column: String },
    #[error("{file}: resource has no data rows")]
    EmptyResource { file: PathBuf },
    #[error("required resource `{0}` is not configured or does not exist")]
    MissingResource(ResourceKind),
}

pub type Result<T, E = ResourceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Frequency,
    Aoa,
    Cefr,
    Efllex,
    EmbeddingNorms,
    Senses,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 6] = [
        ResourceKind::Frequency,
        ResourceKind::Aoa,
        ResourceKind::Cefr,
        ResourceKind::Efllex,
        ResourceKind::EmbeddingNorms,
        ResourceKind::Senses,
    ];

    pub fn canonical_file(self) -> &'static str {
        match self {
            ResourceKind::Frequency => "frequency.tsv",
            ResourceKind::Aoa => "aoa.tsv",
            ResourceKind::Cefr => "cefr.tsv",
            ResourceKind::Efllex => "efllex.tsv",
            ResourceKind::EmbeddingNorms => "embedding_norms.tsv",
            ResourceKind::Senses => "senses.tsv",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResourceKind::Frequency => "frequency",
            ResourceKind::Aoa => "aoa",
            ResourceKind::Cefr => "cefr",
            ResourceKind::Efllex => "efllex",
            ResourceKind::EmbeddingNorms => "embedding_norms",
            ResourceKind::Senses => "senses",
        };
        f.write_str(s)
    }
}

/// Paths of the six resources. A resource listed in `optional` may be
/// unconfigured or absent on disk; any other missing resource is an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceConfig {
    pub frequency: Option<PathBuf>,
    pub aoa: Option<PathBuf>,
    pub cefr: Option<PathBuf>,
    pub efllex: Option<PathBuf>,
    pub embedding_norms: Option<PathBuf>,
    /// Raw `word v1 v2 ...` vectors; norms are computed on load. Ignored when
    /// `embedding_norms` is also set.
    pub embeddings: Option<PathBuf>,
    pub senses: Option<PathBuf>,
    pub optional: BTreeSet<ResourceKind>,
}

impl ResourceConfig {
    /// Config pointing at the canonical file names inside `dir`.
    pub fn canonical(dir: &Path) -> Self {
        ResourceConfig {
            frequency: Some(dir.join(ResourceKind::Frequency.canonical_file())),
            aoa: Some(dir.join(ResourceKind::Aoa.canonical_file())),
            cefr: Some(dir.join(ResourceKind::Cefr.canonical_file())),
            efllex: Some(dir.join(ResourceKind::Efllex.canonical_file())),
            embedding_norms: Some(dir.join(ResourceKind::EmbeddingNorms.canonical_file())),
            embeddings: None,
            senses: Some(dir.join(ResourceKind::Senses.canonical_file())),
            optional: BTreeSet::new(),
        }
    }

    fn path(&self, kind: ResourceKind) -> Option<&Path> {
        match kind {
            ResourceKind::Frequency => self.frequency.as_deref(),
            ResourceKind::Aoa => self.aoa.as_deref(),
            ResourceKind::Cefr => self.cefr.as_deref(),
            ResourceKind::Efllex => self.efllex.as_deref(),
            ResourceKind::EmbeddingNorms => {
                self.embedding_norms.as_deref().or(self.embeddings.as_deref())
            }
            ResourceKind::Senses => self.senses.as_deref(),
        }
    }

    /// Resolve relative paths against `base`.
    pub fn resolve_relative(&mut self, base: &Path) {
        for p in [
            &mut self.frequency,
            &mut self.aoa,
            &mut self.cefr,
            &mut self.efllex,
            &mut self.embedding_norms,
            &mut self.embeddings,
            &mut self.senses,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Result of a resource lookup. A miss is a value, never a silent zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup<T> {
    Found(T),
    NotFound,
    ResourceAbsent,
}

impl<T> Lookup<T> {
    pub fn found(self) -> Option<T> {
        match self {
            Lookup::Found(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, Lookup::Found(_))
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Lookup<U> {
        match self {
            Lookup::Found(v) => Lookup::Found(f(v)),
            Lookup::NotFound => Lookup::NotFound,
            Lookup::ResourceAbsent => Lookup::ResourceAbsent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    /// Occurrences per million words.
    pub fpmw: f64,
    /// Share of programs containing the word.
    pub cd_proportion: f64,
    pub pos_counts: BTreeMap<String, f64>,
}

impl FrequencyEntry {
    /// The most frequent POS tag; ties go to the lexicographically first tag.
    pub fn dominant_pos(&self) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (tag, &count) in &self.pos_counts {
            if count > 0.0 && best.is_none_or(|(_, c)| count > c) {
                best = Some((tag.as_str(), count));
            }
        }
        best.map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, Default)]
pub struct FrequencyNorms {
    entries: HashMap<String, FrequencyEntry>,
    min_zipf: Option<f64>,
}

impl FrequencyNorms {
    pub fn get(&self, word: &str) -> Option<&FrequencyEntry> {
        self.entries.get(&normalize_word(word))
    }

    /// Minimum Zipf value over all entries with positive frequency.
    pub fn min_zipf(&self) -> Option<f64> {
        self.min_zipf
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, FrequencyEntry)>) -> Self {
        let mut map = HashMap::new();
        for (w, e) in entries {
            map.entry(normalize_word(&w)).or_insert(e);
        }
        let min_zipf = map
            .values()
            .filter(|e| e.fpmw > 0.0)
            .map(|e| e.fpmw.log10() + 3.0)
            .min_by(f64::total_cmp);
        FrequencyNorms {
            entries: map,
            min_zipf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaEntry {
    pub aoa_mean: f64,
    pub percent_known: f64,
    pub n_phonemes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenseEntry {
    pub sense_count: u32,
    pub mean_hypernym_depth: f64,
    /// Distinct lemma names across the word's synsets (optional column).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synonym_count: Option<u32>,
}

/// Sense statistics keyed by (word, POS), plus per-word aggregates
/// (summed sense counts, sense-weighted mean depth).
#[derive(Debug, Clone, Default)]
pub struct SenseStats {
    by_pos: HashMap<(String, String), SenseEntry>,
    by_word: HashMap<String, SenseEntry>,
}

impl SenseStats {
    pub fn get(&self, word: &str, pos: &str) -> Option<&SenseEntry> {
        self.by_pos
            .get(&(normalize_word(word), normalize_sense_pos(pos)))
    }

    pub fn word_aggregate(&self, word: &str) -> Option<&SenseEntry> {
        self.by_word.get(&normalize_word(word))
    }

    pub fn len(&self) -> usize {
        self.by_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_pos.is_empty()
    }

    /// Build from `(word, pos, entry)` triples; the first occurrence of a key
    /// wins.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, String, SenseEntry)>) -> Self {
        let mut by_pos = HashMap::new();
        for (w, p, e) in entries {
            by_pos.entry((normalize_word(&w), normalize_sense_pos(&p))).or_insert(e);
        }
        Self::build(by_pos)
    }

    fn build(by_pos: HashMap<(String, String), SenseEntry>) -> Self {
        let mut acc: HashMap<String, (u32, f64, f64, u32, Option<u32>)> = HashMap::new();
        for ((w, _), e) in &by_pos {
            let a = acc.entry(w.clone()).or_default();
            a.0 += e.sense_count;
            a.1 += e.sense_count as f64 * e.mean_hypernym_depth;
            a.2 += e.mean_hypernym_depth;
            a.3 += 1;
            a.4 = a.4.max(e.synonym_count);
        }
        let by_word = acc
            .into_iter()
            .map(|(w, (count, weighted, plain, n, synonyms))| {
                let depth = if count > 0 {
                    weighted / count as f64
                } else {
                    plain / n as f64
                };
                (
                    w,
                    SenseEntry {
                        sense_count: count,
                        mean_hypernym_depth: depth,
                        synonym_count: synonyms,
                    },
                )
            })
            .collect();
        SenseStats { by_pos, by_word }
    }
}

/// Collapse common POS spellings (`n`, `NOUN`, `adj`, `s`, ...) onto
/// `noun`/`verb`/`adjective`/`adverb`; anything else is lowercased as is.
pub fn normalize_sense_pos(pos: &str) -> String {
    let p = pos.trim().to_lowercase();
    match p.as_str() {
        "n" | "noun" | "nn" | "nns" => "noun".into(),
        "v" | "verb" | "vb" => "verb".into(),
        "a" | "s" | "adj" | "adjective" | "jj" => "adjective".into(),
        "r" | "adv" | "adverb" | "rb" => "adverb".into(),
        _ => p,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ResourceKind,
    pub path: PathBuf,
    pub rows: usize,
    pub duplicates: usize,
    pub sha256: String,
}

/// Immutable, indexed view of all lexical resources. `None` marks a resource
/// that was declared optional and is absent.
#[derive(Debug, Clone, Default)]
pub struct ResourceBundle {
    pub frequency: Option<FrequencyNorms>,
    pub aoa: Option<HashMap<String, AoaEntry>>,
    pub cefr: Option<HashMap<String, u8>>,
    pub efllex: Option<HashMap<String, [f64; 5]>>,
    pub embedding_norms: Option<HashMap<String, f64>>,
    pub senses: Option<SenseStats>,
    pub provenance: Vec<Provenance>,
}

/// Borrowed resource value returned by [`ResourceBundle::lookup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResourceValue<'a> {
    Frequency(&'a FrequencyEntry),
    Aoa(&'a AoaEntry),
    Cefr(u8),
    Efllex(&'a [f64; 5]),
    EmbeddingNorm(f64),
    Senses(&'a SenseEntry),
}

fn get_in<'a, V>(map: &'a Option<HashMap<String, V>>, word: &str) -> Lookup<&'a V> {
    match map {
        None => Lookup::ResourceAbsent,
        Some(m) => m
            .get(&normalize_word(word))
            .map_or(Lookup::NotFound, Lookup::Found),
    }
}

impl ResourceBundle {
    pub fn frequency(&self, word: &str) -> Lookup<&FrequencyEntry> {
        match &self.frequency {
            None => Lookup::ResourceAbsent,
            Some(f) => f.get(word).map_or(Lookup::NotFound, Lookup::Found),
        }
    }

    pub fn aoa(&self, word: &str) -> Lookup<&AoaEntry> {
        get_in(&self.aoa, word)
    }

    pub fn cefr(&self, word: &str) -> Lookup<u8> {
        get_in(&self.cefr, word).map(|v| *v)
    }

    pub fn efllex(&self, word: &str) -> Lookup<&[f64; 5]> {
        get_in(&self.efllex, word)
    }

    pub fn embedding_norm(&self, word: &str) -> Lookup<f64> {
        get_in(&self.embedding_norms, word).map(|v| *v)
    }

    /// Per-(word, POS) sense statistics; with `pos = None` the per-word
    /// aggregate is returned.
    pub fn senses(&self, word: &str, pos: Option<&str>) -> Lookup<&SenseEntry> {
        match &self.senses {
            None => Lookup::ResourceAbsent,
            Some(s) => {
                let hit = match pos {
                    Some(p) => s.get(word, p),
                    None => s.word_aggregate(word),
                };
                hit.map_or(Lookup::NotFound, Lookup::Found)
            }
        }
    }

    /// Kind-dispatched lookup; `pos` is only consulted for sense statistics.
    pub fn lookup(&self, kind: ResourceKind, word: &str, pos: Option<&str>) -> Lookup<ResourceValue<'_>> {
        match kind {
            ResourceKind::Frequency => self.frequency(word).map(ResourceValue::Frequency),
            ResourceKind::Aoa => self.aoa(word).map(ResourceValue::Aoa),
            ResourceKind::Cefr => self.cefr(word).map(ResourceValue::Cefr),
            ResourceKind::Efllex => self.efllex(word).map(ResourceValue::Efllex),
            ResourceKind::EmbeddingNorms => self.embedding_norm(word).map(ResourceValue::EmbeddingNorm),
            ResourceKind::Senses => self.senses(word, pos).map(ResourceValue::Senses),
        }
    }

    pub fn is_present(&self, kind: ResourceKind) -> bool {
        match kind {
            ResourceKind::Frequency => self.frequency.is_some(),
            ResourceKind::Aoa => self.aoa.is_some(),
            ResourceKind::Cefr => self.cefr.is_some(),
            ResourceKind::Efllex => self.efllex.is_some(),
            ResourceKind::EmbeddingNorms => self.embedding_norms.is_some(),
            ResourceKind::Senses => self.senses.is_some(),
        }
    }

    pub fn row_count(&self, kind: ResourceKind) -> Option<usize> {
        self.provenance.iter().find(|p| p.kind == kind).map(|p| p.rows)
    }

    /// Write every present resource to its canonical TSV inside `dir` and
    /// return a config that reloads them. Output order is sorted by key.
    pub fn write_canonical(&self, dir: &Path) -> Result<ResourceConfig> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ResourceError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut cfg = ResourceConfig::default();
        for kind in ResourceKind::ALL {
            if !self.is_present(kind) {
                cfg.optional.insert(kind);
                continue;
            }
            let path = dir.join(kind.canonical_file());
            let mut out = String::new();
            match kind {
                ResourceKind::Frequency => {
                    out.push_str("word\tfpmw\tcd_proportion\tpos_counts\n");
                    let f = self.frequency.as_ref().unwrap();
                    let mut keys: Vec<_> = f.entries.keys().collect();
                    keys.sort();
                    for k in keys {
                        let e = &f.entries[k];
                        let pos = e
                            .pos_counts
                            .iter()
                            .map(|(t, c)| format!("{t}:{c}"))
                            .collect::<Vec<_>>()
                            .join(";");
                        out.push_str(&format!("{k}\t{}\t{}\t{pos}\n", e.fpmw, e.cd_proportion));
                    }
                    cfg.frequency = Some(path.clone());
                }
                ResourceKind::Aoa => {
                    out.push_str("word\taoa_mean\tpercent_known\tn_phonemes\n");
                    for (k, e) in sorted(self.aoa.as_ref().unwrap()) {
                        out.push_str(&format!(
                            "{k}\t{}\t{}\t{}\n",
                            e.aoa_mean, e.percent_known, e.n_phonemes
                        ));
                    }
                    cfg.aoa = Some(path.clone());
                }
                ResourceKind::Cefr => {
                    out.push_str("word\tlevel\n");
                    for (k, l) in sorted(self.cefr.as_ref().unwrap()) {
                        out.push_str(&format!("{k}\t{}\n", CEFR_LABELS[(*l - 1) as usize]));
                    }
                    cfg.cefr = Some(path.clone());
                }
                ResourceKind::Efllex => {
                    out.push_str("word\tfreq_a1\tfreq_a2\tfreq_b1\tfreq_b2\tfreq_c1\n");
                    for (k, b) in sorted(self.efllex.as_ref().unwrap()) {
                        out.push_str(&format!(
                            "{k}\t{}\t{}\t{}\t{}\t{}\n",
                            b[0], b[1], b[2], b[3], b[4]
                        ));
                    }
                    cfg.efllex = Some(path.clone());
                }
                ResourceKind::EmbeddingNorms => {
                    out.push_str("word\tl2_norm\n");
                    for (k, n) in sorted(self.embedding_norms.as_ref().unwrap()) {
                        out.push_str(&format!("{k}\t{n}\n"));
                    }
                    cfg.embedding_norms = Some(path.clone());
                }
                ResourceKind::Senses => {
                    out.push_str("word\tpos\tsense_count\tmean_hypernym_depth\tsynonym_count\n");
                    let s = self.senses.as_ref().unwrap();
                    let mut keys: Vec<_> = s.by_pos.keys().collect();
                    keys.sort();
                    for key in keys {
                        let e = &s.by_pos[key];
                        let syn = e.synonym_count.map(|c| c.to_string()).unwrap_or_default();
                        out.push_str(&format!(
                            "{}\t{}\t{}\t{}\t{}\n",
                            key.0, key.1, e.sense_count, e.mean_hypernym_depth, syn
                        ));
                    }
                    cfg.senses = Some(path.clone());
                }
            }
            fs::write(&path, out).map_err(io(&path))?;
        }
        Ok(cfg)
    }
}

fn sorted<V>(m: &HashMap<String, V>) -> Vec<(&String, &V)> {
    let mut v: Vec<_> = m.iter().collect();
    v.sort_by(|a, b| a.0.cmp(b.0));
    v
}

pub const CEFR_LABELS: [&str; 6] = ["A1", "A2", "B1", "B2", "C1", "C2"];

/// Parse `A1`..`C2` (case-insensitive) into 1..=6.
pub fn parse_cefr(s: &str) -> Option<u8> {
    let up = s.trim().to_uppercase();
    CEFR_LABELS
        .iter()
        .position(|l| *l == up)
        .map(|i| i as u8 + 1)
}

/// Load every configured resource.
pub fn load_resource_bundle(config: &ResourceConfig) -> Result<ResourceBundle> {
    let mut bundle = ResourceBundle::default();
    for kind in ResourceKind::ALL {
        let path = match config.path(kind) {
            Some(p) if p.exists() => p.to_path_buf(),
            _ if config.optional.contains(&kind) => {
                log::info!("resource `{kind}` is optional and absent");
                continue;
            }
            _ => return Err(ResourceError::MissingResource(kind)),
        };
        let bytes = fs::read(&path).map_err(|source| ResourceError::Io {
            path: path.clone(),
            source,
        })?;
        let sha256 = hex_digest(&bytes);
        let text = String::from_utf8(bytes).map_err(|e| ResourceError::MalformedRow {
            file: path.clone(),
            line: 0,
            reason: format!("invalid UTF-8: {e}"),
        })?;
        let (rows, duplicates) = match kind {
            ResourceKind::Frequency => {
                let (m, d) = parse_table(&path, &text, &["word", "fpmw", "cd_proportion", "pos_counts"], parse_frequency_row)?;
                let n = m.len();
                bundle.frequency = Some(FrequencyNorms::from_entries(m));
                (n, d)
            }
            ResourceKind::Aoa => {
                let (m, d) = parse_table(&path, &text, &["word", "aoa_mean", "percent_known", "n_phonemes"], parse_aoa_row)?;
                let n = m.len();
                bundle.aoa = Some(m);
                (n, d)
            }
            ResourceKind::Cefr => {
                let (m, d) = parse_table(&path, &text, &["word", "level"], |f| {
                    parse_cefr(f[1]).ok_or_else(|| format!("unknown CEFR level `{}`", f[1]))
                })?;
                let n = m.len();
                bundle.cefr = Some(m);
                (n, d)
            }
            ResourceKind::Efllex => {
                let cols = ["word", "freq_a1", "freq_a2", "freq_b1", "freq_b2", "freq_c1"];
                let (m, d) = parse_table(&path, &text, &cols, |f| {
                    let mut bands = [0.0; 5];
                    for (i, b) in bands.iter_mut().enumerate() {
                        *b = parse_nonneg(f[i + 1], cols[i + 1])?;
                    }
                    Ok(bands)
                })?;
                let n = m.len();
                bundle.efllex = Some(m);
                (n, d)
            }
            ResourceKind::EmbeddingNorms => {
                let is_tsv = config.embedding_norms.is_some();
                let (m, d) = if is_tsv {
                    parse_table(&path, &text, &["word", "l2_norm"], |f| parse_nonneg(f[1], "l2_norm"))?
                } else {
                    parse_embeddings(&path, &text)?
                };
                let n = m.len();
                bundle.embedding_norms = Some(m);
                (n, d)
            }
            ResourceKind::Senses => {
                let (m, d) = parse_senses(&path, &text)?;
                let n = m.len();
                bundle.senses = Some(SenseStats::build(m));
                (n, d)
            }
        };
        if duplicates > 0 {
            log::warn!("{}: {duplicates} duplicate word(s); first occurrence kept", path.display());
        }
        bundle.provenance.push(Provenance {
            kind,
            path,
            rows,
            duplicates,
            sha256,
        });
    }
    Ok(bundle)
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn parse_f64(s: &str, col: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{col}` is not a number: `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{col}` is not finite"))
    }
}

fn parse_nonneg(s: &str, col: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s, col)?;
    if v < 0.0 {
        return Err(format!("`{col}` must be non-negative, got {v}"));
    }
    Ok(v)
}

fn parse_unit(s: &str, col: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s, col)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("`{col}` must lie in [0, 1], got {v}"));
    }
    Ok(v)
}

fn parse_count(s: &str, col: &str) -> std::result::Result<u32, String> {
    let v = parse_nonneg(s, col)?;
    if v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(format!("`{col}` must be a non-negative integer, got {v}"));
    }
    Ok(v as u32)
}

fn parse_frequency_row(f: &[&str]) -> std::result::Result<FrequencyEntry, String> {
    let fpmw = parse_nonneg(f[1], "fpmw")?;
    let cd_proportion = parse_unit(f[2], "cd_proportion")?;
    let mut pos_counts = BTreeMap::new();
    for pair in f[3].split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (tag, count) = pair
            .rsplit_once(':')
            .ok_or_else(|| format!("pos_counts entry `{pair}` is not `tag:count`"))?;
        let count = parse_nonneg(count, "pos_counts")?;
        *pos_counts.entry(tag.trim().to_lowercase()).or_insert(0.0) += count;
    }
    Ok(FrequencyEntry {
        fpmw,
        cd_proportion,
        pos_counts,
    })
}

fn parse_aoa_row(f: &[&str]) -> std::result::Result<AoaEntry, String> {
    let aoa_mean = parse_f64(f[1], "aoa_mean")?;
    if aoa_mean <= 0.0 {
        return Err(format!("`aoa_mean` must be positive, got {aoa_mean}"));
    }
    let n_phonemes = parse_count(f[3], "n_phonemes")?;
    if n_phonemes == 0 {
        return Err("`n_phonemes` must be at least 1".into());
    }
    Ok(AoaEntry {
        aoa_mean,
        percent_known: parse_unit(f[2], "percent_known")?,
        n_phonemes,
    })
}

struct Table<'a> {
    rows: Vec<(u64, Vec<&'a str>)>,
}

/// Split a TSV into projected rows (selected columns in `cols` order),
/// with 1-based file line numbers.
fn project<'a>(path: &Path, text: &'a str, cols: &[&str]) -> Result<Table<'a>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| ResourceError::EmptyResource {
        file: path.to_path_buf(),
    })?;
    let header: Vec<String> = header
        .trim_start_matches('\u{feff}')
        .split('\t')
        .map(|h| h.trim().to_lowercase())
        .collect();
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| ResourceError::MissingRequiredColumn {
                    file: path.to_path_buf(),
                    column: (*c).to_string(),
                })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let line_no = i as u64 + 1;
        let projected = idx
            .iter()
            .map(|&j| {
                fields.get(j).copied().ok_or_else(|| ResourceError::MalformedRow {
                    file: path.to_path_buf(),
                    line: line_no,
                    reason: format!("expected at least {} fields, found {}", j + 1, fields.len()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line_no, projected));
    }
    if rows.is_empty() {
        return Err(ResourceError::EmptyResource {
            file: path.to_path_buf(),
        });
    }
    Ok(Table { rows })
}

fn parse_table<V>(
    path: &Path,
    text: &str,
    cols: &[&str],
    parse: impl Fn(&[&str]) -> std::result::Result<V, String>,
) -> Result<(HashMap<String, V>, usize)> {
    let table = project(path, text, cols)?;
    let mut map = HashMap::with_capacity(table.rows.len());
    let mut duplicates = 0;
    for (line, fields) in table.rows {
        let word = normalize_word(fields[0]);
        if word.is_empty() {
            return Err(malformed(path, line, "empty word".into()));
        }
        let value = parse(&fields).map_err(|r| malformed(path, line, r))?;
        if map.contains_key(&word) {
            duplicates += 1;
        } else {
            map.insert(word, value);
        }
    }
    Ok((map, duplicates))
}

fn parse_senses(path: &Path, text: &str) -> Result<(HashMap<(String, String), SenseEntry>, usize)> {
    let has_synonyms = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|h| h.split('\t').any(|c| c.trim().eq_ignore_ascii_case("synonym_count")));
    let mut cols = vec!["word", "pos", "sense_count", "mean_hypernym_depth"];
    if has_synonyms {
        cols.push("synonym_count");
    }
    let table = project(path, text, &cols)?;
    let mut map = HashMap::new();
    let mut duplicates = 0;
    for (line, f) in table.rows {
        let key = (normalize_word(f[0]), normalize_sense_pos(f[1]));
        if key.0.is_empty() {
            return Err(malformed(path, line, "empty word".into()));
        }
        let entry = (|| {
            Ok::<_, String>(SenseEntry {
                sense_count: parse_count(f[2], "sense_count")?,
                mean_hypernym_depth: parse_nonneg(f[3], "mean_hypernym_depth")?,
                synonym_count: match f.get(4).map(|v| v.trim()) {
                    Some(v) if !v.is_empty() => Some(parse_count(v, "synonym_count")?),
                    _ => None,
                },
            })
        })()
        .map_err(|r| malformed(path, line, r))?;
        if map.contains_key(&key) {
            duplicates += 1;
        } else {
            map.insert(key, entry);
        }
    }
    Ok((map, duplicates))
}

/// `word v1 v2 ... vd` per line; a leading `count dim` header line is skipped.
fn parse_embeddings(path: &Path, text: &str) -> Result<(HashMap<String, f64>, usize)> {
    let mut map = HashMap::new();
    let mut duplicates = 0;
    let mut dim: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if i == 0 && values.len() == 1 && word.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        if values.is_empty() {
            return Err(malformed(path, line_no, "no vector components".into()));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(malformed(
                    path,
                    line_no,
                    format!("expected {d} components, found {}", values.len()),
                ))
            }
            _ => {}
        }
        let mut sq = 0.0;
        for v in values {
            let x = parse_f64(v, "component").map_err(|r| malformed(path, line_no, r))?;
            sq += x * x;
        }
        let key = normalize_word(word);
        if map.contains_key(&key) {
            duplicates += 1;
        } else {
            map.insert(key, sq.sqrt());
        }
    }
    if map.is_empty() {
        return Err(ResourceError::EmptyResource {
            file: path.to_path_buf(),
        });
    }
    Ok((map, duplicates))
}

fn malformed(path: &Path, line: u64, reason: String) -> ResourceError {
    ResourceError::MalformedRow {
        file: path.to_path_buf(),
        line,
        reason,
    }
}
