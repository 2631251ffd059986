//! Seeded synthetic corpora and resources with a known latent structure.
//!
//! Every English pseudo-word has a latent familiarity `z`; all six resources
//! are noisy functions of `z`, and gold difficulty rises with `z` and, for
//! Spanish and German, with orthographic overlap between the target and its
//! L1 source. Chinese sources are CJK strings, so their character
//! similarity is exactly zero. Items whose tested POS differs from the
//! dominant POS get noisier gold scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{KvlPaths, RunConfig};
use crate::corpus::{write_kvl, KvlItem, KvlSplit, Split, L1};
use crate::resources::{AoaEntry, FrequencyEntry, FrequencyNorms, ResourceBundle, SenseEntry, SenseStats};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Items per split (train, dev, test) for every L1.
    pub split_sizes: [usize; 3],
    pub l1s: Vec<L1>,
    /// Standard deviation of the gold noise for items without POS competition.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            split_sizes: [400, 60, 120],
            l1s: L1::ALL.to_vec(),
            noise: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWord {
    pub word: String,
    pub z: f64,
    pub dominant_pos: &'static str,
}

#[derive(Debug, Clone)]
pub struct Inflection {
    pub form: String,
    pub lemma: String,
    pub pos: String,
    pub is_default: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub words: Vec<SyntheticWord>,
    pub bundle: ResourceBundle,
    pub splits: BTreeMap<(L1, Split), KvlSplit>,
    pub inflections: Vec<Inflection>,
}

const POS: [&str; 3] = ["noun", "verb", "adjective"];
const ONSETS: [&str; 16] = ["b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "v", "st", "pr"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ea"];
const CODAS: [&str; 8] = ["", "", "n", "r", "l", "t", "st", "nd"];
const L1_ONSETS: [&str; 10] = ["z", "w", "sch", "j", "ñ", "qu", "x", "ll", "gu", "pf"];

/// Real words placed in every training split so examples have stable anchors.
const ANCHORS: [(&str, &str, &str, &str, &str); 4] = [
    ("cable", "noun", "Kabel", "cable", "电缆"),
    ("house", "noun", "Haus", "casa", "房子"),
    ("thought", "noun", "Gedanke", "pensamiento", "想法"),
    ("light", "noun", "Licht", "luz", "光"),
];

fn syllable(rng: &mut ChaCha8Rng, onsets: &[&str]) -> String {
    let mut s = String::new();
    s.push_str(onsets[rng.random_range(0..onsets.len())]);
    s.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
    s.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    s
}

fn pseudo_word(rng: &mut ChaCha8Rng, onsets: &[&str]) -> String {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| syllable(rng, onsets)).collect()
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    sd * Normal::new(0.0, 1.0).unwrap().sample(rng)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn cjk_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| char::from_u32(rng.random_range(0x4E00..0x4E00 + 400)).unwrap())
        .collect()
}

/// Spanish- or German-looking cognate of an English word.
fn cognate(rng: &mut ChaCha8Rng, word: &str, l1: L1, pos: &str) -> String {
    match l1 {
        L1::De => {
            let mut w = word.replace('c', "k");
            if rng.random_bool(0.3) {
                w.push('e');
            }
            if pos == "noun" {
                capitalize(&w)
            } else {
                w
            }
        }
        _ => {
            let mut w = word.to_string();
            if !w.ends_with(['a', 'e', 'i', 'o', 'u']) {
                w.push(if rng.random_bool(0.5) { 'o' } else { 'a' });
            }
            w
        }
    }
}

fn confusor_note(l1: L1, other: &str) -> String {
    match l1 {
        L1::De => format!(" (nicht: {other})"),
        L1::Es => format!(" (no: {other})"),
        L1::Zh => format!("（非 {other}）"),
    }
}

fn l1_offset(l1: L1) -> f64 {
    match l1 {
        L1::Es => 0.0,
        L1::De => 0.2,
        L1::Zh => -0.3,
    }
}

impl SyntheticData {
    pub fn generate(cfg: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let std = Normal::new(0.0, 1.0).unwrap();
        let total: usize = cfg.split_sizes.iter().sum();

        // English vocabulary: anchors plus unique pseudo-words.
        let mut seen: BTreeSet<String> = ANCHORS.iter().map(|a| a.0.to_string()).collect();
        let mut words: Vec<SyntheticWord> = ANCHORS
            .iter()
            .map(|a| SyntheticWord {
                word: a.0.to_string(),
                z: 1.0,
                dominant_pos: "noun",
            })
            .collect();
        while words.len() < total + ANCHORS.len() {
            let w = pseudo_word(&mut rng, &ONSETS);
            if w.len() < 2 || !seen.insert(w.clone()) {
                continue;
            }
            words.push(SyntheticWord {
                word: w,
                z: std.sample(&mut rng),
                dominant_pos: POS[rng.random_range(0..POS.len())],
            });
        }

        let bundle = Self::resources(&mut rng, &words);

        let mut splits = BTreeMap::new();
        for &l1 in &cfg.l1s {
            let mut order: Vec<usize> = (ANCHORS.len()..words.len()).collect();
            order.shuffle(&mut rng);
            let mut start = 0;
            for (k, split) in Split::ALL.into_iter().enumerate() {
                let mut idx: Vec<usize> = order[start..start + cfg.split_sizes[k]].to_vec();
                start += cfg.split_sizes[k];
                if split == Split::Train {
                    idx.splice(0..0, 0..ANCHORS.len());
                }
                let items = idx
                    .into_iter()
                    .enumerate()
                    .map(|(n, wi)| Self::item(&mut rng, cfg, l1, split, n, wi, &words[wi]))
                    .collect();
                splits.insert((l1, split), KvlSplit { l1, split, items });
            }
        }

        let mut inflections = Vec::new();
        for w in &words {
            inflections.push(Inflection {
                form: w.word.clone(),
                lemma: w.word.clone(),
                pos: w.dominant_pos.to_string(),
                is_default: true,
            });
            for p in POS.iter().filter(|p| **p != w.dominant_pos) {
                inflections.push(Inflection {
                    form: w.word.clone(),
                    lemma: w.word.clone(),
                    pos: p.to_string(),
                    is_default: false,
                });
            }
            inflections.push(Inflection {
                form: format!("{}s", w.word),
                lemma: w.word.clone(),
                pos: "noun".into(),
                is_default: true,
            });
            let past = if w.word.ends_with('e') {
                format!("{}d", w.word)
            } else {
                format!("{}ed", w.word)
            };
            inflections.push(Inflection {
                form: past,
                lemma: w.word.clone(),
                pos: "verb".into(),
                is_default: true,
            });
        }
        SyntheticData {
            words,
            bundle,
            splits,
            inflections,
        }
    }

    fn resources(rng: &mut ChaCha8Rng, words: &[SyntheticWord]) -> ResourceBundle {
        let mut freq = Vec::new();
        let mut aoa = HashMap::new();
        let mut cefr = HashMap::new();
        let mut efllex = HashMap::new();
        let mut norms = HashMap::new();
        let mut senses = Vec::new();
        for w in words {
            let z = w.z;
            if w.word == "cable" || rng.random_bool(0.95) {
                let fpmw = 10f64.powf(1.0 + 0.8 * z + gauss(rng, 0.2));
                let dom = rng.random_range(0.5..1.0);
                let mut pos_counts = BTreeMap::new();
                let total = (fpmw * 100.0).round().max(2.0);
                pos_counts.insert(w.dominant_pos.to_string(), (total * dom).round().max(1.0));
                let other = POS[(POS.iter().position(|p| *p == w.dominant_pos).unwrap() + 1) % 3];
                pos_counts.insert(other.to_string(), (total * (1.0 - dom)).round().min(total * dom - 1.0).max(0.0));
                freq.push((
                    w.word.clone(),
                    FrequencyEntry {
                        fpmw,
                        cd_proportion: sigmoid(1.2 * z + gauss(rng, 0.3)),
                        pos_counts,
                    },
                ));
            }
            if rng.random_bool(0.9) {
                let n_letters = w.word.chars().count() as f64;
                aoa.insert(
                    w.word.clone(),
                    AoaEntry {
                        aoa_mean: (9.0 - 2.0 * z + gauss(rng, 1.0)).clamp(2.0, 18.0),
                        percent_known: sigmoid(2.0 * z + 1.0 + gauss(rng, 0.3)),
                        n_phonemes: ((n_letters * 0.8).round() as u32).max(1),
                    },
                );
            }
            if rng.random_bool(0.85) {
                cefr.insert(w.word.clone(), (3.5 - 1.2 * z + gauss(rng, 0.7)).round().clamp(1.0, 6.0) as u8);
            }
            if rng.random_bool(0.8) {
                let mut bands = [0.0; 5];
                for (k, b) in bands.iter_mut().enumerate() {
                    let level = z + gauss(rng, 0.5) + 0.4 * k as f64 - 0.8;
                    *b = if level > 0.0 { (level * 10.0 * 1000.0).round() / 1000.0 } else { 0.0 };
                }
                efllex.insert(w.word.clone(), bands);
            }
            norms.insert(w.word.clone(), (5.0 - 0.5 * z + gauss(rng, 0.3)).max(0.1));
            let count = if w.word == "cable" {
                6
            } else {
                (0.5 * z + 1.0 + gauss(rng, 0.5)).exp().round().max(1.0) as u32
            };
            senses.push((
                w.word.clone(),
                w.dominant_pos.to_string(),
                SenseEntry {
                    sense_count: count,
                    mean_hypernym_depth: (4.0 + gauss(rng, 1.5)).max(0.0),
                    synonym_count: Some(count + rng.random_range(0..4)),
                },
            ));
        }
        ResourceBundle {
            frequency: Some(FrequencyNorms::from_entries(freq)),
            aoa: Some(aoa),
            cefr: Some(cefr),
            efllex: Some(efllex),
            embedding_norms: Some(norms),
            senses: Some(SenseStats::from_entries(senses)),
            provenance: Vec::new(),
        }
    }

    fn item(
        rng: &mut ChaCha8Rng,
        cfg: &SyntheticConfig,
        l1: L1,
        split: Split,
        n: usize,
        word_index: usize,
        w: &SyntheticWord,
    ) -> KvlItem {
        let noise = Normal::new(0.0, 1.0).unwrap();
        let anchor = ANCHORS.iter().find(|a| a.0 == w.word);
        let pos = if anchor.is_some() || rng.random_bool(0.78) {
            w.dominant_pos
        } else {
            POS[(POS.iter().position(|p| *p == w.dominant_pos).unwrap() + 1) % 3]
        };
        let competing = pos != w.dominant_pos;
        let (mut source, transfer) = match (anchor, l1) {
            (Some(a), L1::De) => (a.2.to_string(), if a.0 == "cable" { 1.0 } else { 0.3 }),
            (Some(a), L1::Es) => (a.3.to_string(), if a.0 == "cable" { 1.0 } else { 0.0 }),
            (Some(a), L1::Zh) => (a.4.to_string(), 0.0),
            (None, L1::Zh) => (cjk_word(rng), 0.0),
            (None, _) => {
                let p_cognate = if l1 == L1::Es { 0.4 } else { 0.35 };
                if rng.random_bool(p_cognate) {
                    (cognate(rng, &w.word, l1, pos), 1.0)
                } else {
                    let s = pseudo_word(rng, &L1_ONSETS);
                    (if l1 == L1::De && pos == "noun" { capitalize(&s) } else { s }, 0.0)
                }
            }
        };
        if anchor.is_none() && rng.random_bool(0.05) {
            let other = pseudo_word(rng, &ONSETS);
            source.push_str(&confusor_note(l1, &other));
        }
        let context = if rng.random_bool(0.15) {
            String::new()
        } else {
            let n_tokens = rng.random_range(3..12);
            (0..n_tokens)
                .map(|_| pseudo_word(rng, &L1_ONSETS))
                .collect::<Vec<_>>()
                .join(" ")
                + "."
        };
        let len = w.word.chars().count() as f64;
        let sd = if competing { cfg.noise * 1.3 } else { cfg.noise };
        let gold = 2.5 + l1_offset(l1) + 1.0 * w.z + 1.2 * transfer - 0.08 * (len - 6.0) + sd * noise.sample(rng);
        let gold = if w.word == "cable" && l1 == L1::De { 0.9 } else { gold };
        let gold = (gold * 1e4).round() / 1e4;
        KvlItem::new(
            format!("{}-{}-{:04}-{}", l1.code(), split.name(), n, word_index),
            l1,
            source,
            pos,
            context,
            w.word.clone(),
            Some(gold),
        )
    }

    pub fn items(&self, l1: L1, split: Split) -> &[KvlItem] {
        self.splits.get(&(l1, split)).map_or(&[], |s| &s.items)
    }

    pub fn write_inflections(&self, path: &Path) -> io::Result<()> {
        let mut out = String::from("form\tlemma\tpos\tis_default\n");
        for i in &self.inflections {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", i.form, i.lemma, i.pos, u8::from(i.is_default)));
        }
        std::fs::write(path, out)
    }

    /// Write resources, KVL splits, the inflection table and `config.toml`
    /// under `dir`. `base` supplies every non-path setting; the returned
    /// config has absolute paths.
    pub fn write_to(&self, dir: &Path, base: &RunConfig) -> io::Result<RunConfig> {
        let to_io = |e: Box<dyn std::error::Error + Send + Sync>| io::Error::other(e.to_string());
        let kvl_dir = dir.join("kvl");
        std::fs::create_dir_all(&kvl_dir)?;
        let resources = self.bundle.write_canonical(&dir.join("resources")).map_err(|e| to_io(e.into()))?;
        let mut cfg = base.clone();
        cfg.resources = resources;
        cfg.output_dir = dir.join("out");
        cfg.kvl.clear();
        for ((l1, split), s) in &self.splits {
            let path: PathBuf = kvl_dir.join(format!("{}_{}.csv", l1.code(), split.name()));
            let file = std::fs::File::create(&path)?;
            write_kvl(&s.items, file).map_err(|e| to_io(e.into()))?;
            let entry = cfg.kvl.entry(*l1).or_insert_with(KvlPaths::default);
            match split {
                Split::Train => entry.train = Some(path),
                Split::Dev => entry.dev = Some(path),
                Split::Test => entry.test = Some(path),
            }
        }
        let infl = dir.join("inflections.tsv");
        self.write_inflections(&infl)?;
        cfg.service.inflections = Some(infl);
        std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_disjoint() {
        let cfg = SyntheticConfig {
            split_sizes: [50, 10, 20],
            ..Default::default()
        };
        let a = SyntheticData::generate(&cfg);
        let b = SyntheticData::generate(&cfg);
        for key in a.splits.keys() {
            assert_eq!(a.splits[key], b.splits[key]);
        }
        for l1 in L1::ALL {
            assert_eq!(a.items(l1, Split::Train).len(), 54);
            let train: BTreeSet<&str> = a.items(l1, Split::Train).iter().map(|i| i.target_word.as_str()).collect();
            assert!(a.items(l1, Split::Test).iter().all(|i| !train.contains(i.target_word.as_str())));
        }
        let cable = a.items(L1::De, Split::Train).iter().find(|i| i.target_word == "cable").unwrap();
        assert_eq!(cable.source_word, "Kabel");
        assert_eq!(cable.difficulty, Some(0.9));
        assert_eq!(a.bundle.senses("cable", Some("noun")).found().unwrap().sense_count, 6);
    }
}
