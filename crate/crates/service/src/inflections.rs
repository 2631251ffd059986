use std::collections::BTreeMap;
use std::path::Path;

use lexdiff_core::resources::normalize_sense_pos;
use lexdiff_core::text::normalize_word;
use serde::Deserialize;

use crate::ServiceError;

/// One (lemma, POS) reading of an inflected form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub lemma: String,
    pub pos: String,
    pub is_default: bool,
}

/// Inflected form to candidate readings, read from `inflections.tsv`
/// (`form`, `lemma`, `pos`, `is_default`).
#[derive(Debug, Clone, Default)]
pub struct InflectionTable {
    forms: BTreeMap<String, Vec<Candidate>>,
}

#[derive(Deserialize)]
struct Row {
    form: String,
    lemma: String,
    pos: String,
    is_default: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

impl InflectionTable {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let bad = |line: u64, message: String| ServiceError::Inflections {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut r = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .from_path(path)
            .map_err(|e| bad(0, e.to_string()))?;
        let mut table = InflectionTable::default();
        for (k, rec) in r.deserialize::<Row>().enumerate() {
            let line = k as u64 + 2;
            let row = rec.map_err(|e| bad(line, e.to_string()))?;
            let is_default = parse_bool(&row.is_default)
                .ok_or_else(|| bad(line, format!("is_default must be a boolean, got {:?}", row.is_default)))?;
            table.insert(&row.form, &row.lemma, &row.pos, is_default);
        }
        Ok(table)
    }

    pub fn insert(&mut self, form: &str, lemma: &str, pos: &str, is_default: bool) {
        let c = Candidate {
            lemma: normalize_word(lemma),
            pos: normalize_sense_pos(pos),
            is_default,
        };
        let list = self.forms.entry(normalize_word(form)).or_default();
        if !list.contains(&c) {
            list.push(c);
        }
    }

    /// Readings of `form`, default-flagged ones first, otherwise in file order.
    pub fn candidates(&self, form: &str) -> Vec<&Candidate> {
        let mut v: Vec<&Candidate> = self.forms.get(&normalize_word(form)).map(|l| l.iter().collect()).unwrap_or_default();
        v.sort_by_key(|c| !c.is_default);
        v
    }

    /// Default POS flagged for a lemma's base form.
    pub fn default_pos(&self, lemma: &str) -> Option<&str> {
        let lemma = normalize_word(lemma);
        self.forms
            .get(&lemma)?
            .iter()
            .find(|c| c.is_default && c.lemma == lemma)
            .map(|c| c.pos.as_str())
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}
