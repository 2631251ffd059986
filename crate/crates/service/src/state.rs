use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use lexdiff_core::config::RunConfig;
use lexdiff_core::corpus::{parse_kvl, KvlItem, Split, L1};
use lexdiff_core::explain::attribute_all;
use lexdiff_core::features::{extract_features, Feature, FeatureGroup, N_FEATURES};
use lexdiff_core::model::TreeEnsemble;
use lexdiff_core::pipeline::{discover_models, median_shares, shares_map, Pipeline};
use lexdiff_core::resources::normalize_sense_pos;
use lexdiff_core::stats::{median, percentile};
use lexdiff_core::text::normalize_word;
use serde::{Deserialize, Serialize};

use crate::inflections::InflectionTable;
use crate::ServiceError;

/// One feature's contribution to a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureContribution {
    pub feature: String,
    pub group: String,
    /// Numeric value, categorical level, or null when missing.
    pub value: serde_json::Value,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordReport {
    pub lemma: String,
    pub pos: String,
    pub l1: L1,
    pub item_id: String,
    pub source_word: String,
    pub clue_letter: String,
    pub predicted: f64,
    pub gold: Option<f64>,
    /// Quintile bin (0 = lowest fifth of training difficulty) of `predicted`.
    pub bin: usize,
    pub gold_bin: Option<usize>,
    pub group_shares: BTreeMap<FeatureGroup, f64>,
    pub top_features: Vec<FeatureContribution>,
    pub extension: bool,
    pub n_models: usize,
}

/// Scoreable items of one L1 keyed by (lemma, POS).
#[derive(Debug, Default)]
struct ItemIndex {
    by_key: BTreeMap<(String, String), KvlItem>,
}

impl ItemIndex {
    /// First item wins for duplicate (lemma, POS) keys.
    fn add(&mut self, items: impl IntoIterator<Item = KvlItem>) {
        for it in items {
            let key = (normalize_word(&it.target_word), normalize_sense_pos(&it.source_pos));
            self.by_key.entry(key).or_insert(it);
        }
    }

    fn get(&self, lemma: &str, pos: &str) -> Option<&KvlItem> {
        self.by_key.get(&(lemma.to_string(), pos.to_string()))
    }

    fn pos_of(&self, lemma: &str) -> Vec<String> {
        self.by_key
            .range((lemma.to_string(), String::new())..)
            .take_while(|((l, _), _)| l == lemma)
            .map(|((_, p), _)| p.clone())
            .collect()
    }
}

pub struct LanguageModel {
    pub l1: L1,
    pub seeds: Vec<u64>,
    models: Vec<TreeEnsemble>,
    /// Interior quintile edges of training gold difficulty.
    pub quintiles: [f64; 4],
    kvl: ItemIndex,
    extension: ItemIndex,
    cache: RwLock<HashMap<(bool, String, String), Arc<WordReport>>>,
}

/// How a lookup resolved.
pub enum Resolution {
    Found(Arc<WordReport>, Vec<String>),
    UnknownLemma,
    UnknownPos(Vec<String>),
}

pub fn bin_of(quintiles: &[f64; 4], v: f64) -> usize {
    quintiles.iter().filter(|&&q| v > q).count()
}

impl LanguageModel {
    fn index(&self, extension: bool) -> impl Iterator<Item = &ItemIndex> {
        std::iter::once(&self.kvl).chain(extension.then_some(&self.extension))
    }

    /// Available POS values for a lemma, in sorted order.
    pub fn pos_alternatives(&self, lemma: &str, extension: bool) -> Vec<String> {
        let mut v: Vec<String> = self.index(extension).flat_map(|i| i.pos_of(lemma)).collect();
        v.sort();
        v.dedup();
        v
    }

    fn item(&self, lemma: &str, pos: &str, extension: bool) -> Option<(&KvlItem, bool)> {
        if let Some(it) = self.kvl.get(lemma, pos) {
            return Some((it, false));
        }
        if extension {
            return self.extension.get(lemma, pos).map(|it| (it, true));
        }
        None
    }
}

pub struct AppState {
    pub pipeline: Pipeline,
    pub inflections: InflectionTable,
    pub languages: BTreeMap<L1, LanguageModel>,
    /// L1s whose model directory exists but could not be loaded.
    pub load_errors: BTreeMap<L1, String>,
    pub top_k: usize,
    pub max_text_bytes: usize,
}

fn load_items(p: &Pipeline, l1: L1) -> Result<(Vec<KvlItem>, Vec<KvlItem>), ServiceError> {
    let mut kvl = Vec::new();
    let mut train_gold = Vec::new();
    for split in Split::ALL {
        if !p.has_split(l1, split) {
            continue;
        }
        let s = p.split(l1, split)?;
        if split == Split::Train {
            train_gold = s.items.clone();
        }
        kvl.extend(s.items);
    }
    Ok((kvl, train_gold))
}

fn load_language(p: &Pipeline, l1: L1, seeds: &[u64]) -> Result<LanguageModel, ServiceError> {
    let models: Vec<TreeEnsemble> = p.load_models(l1, seeds)?.into_iter().map(|(_, m)| m).collect();
    for m in &models {
        if m.vectorizer.is_none() {
            return Err(ServiceError::Model(format!("{l1} model carries no character vectorizer")));
        }
        if m.l1.is_some_and(|x| x != l1) {
            return Err(ServiceError::Model(format!("model under {l1}/ was trained on another L1")));
        }
    }
    let (items, train) = load_items(p, l1)?;
    let gold: Vec<f64> = train.iter().filter_map(|i| i.difficulty).collect();
    if gold.is_empty() {
        return Err(ServiceError::Model(format!("{l1} training split has no gold difficulties")));
    }
    let q = |p: f64| percentile(&gold, p).unwrap();
    let mut kvl = ItemIndex::default();
    kvl.add(items);
    let mut extension = ItemIndex::default();
    if let Some(paths) = p.config.kvl.get(&l1) {
        for path in &paths.extension {
            let (s, diags) = parse_kvl(path, l1, Split::Test, &p.mapping)?;
            for d in diags {
                log::warn!("{}:{}: {}", path.display(), d.line, d.message);
            }
            extension.add(s.items);
        }
    }
    Ok(LanguageModel {
        l1,
        seeds: seeds.to_vec(),
        models,
        quintiles: [q(20.0), q(40.0), q(60.0), q(80.0)],
        kvl,
        extension,
        cache: RwLock::new(HashMap::new()),
    })
}

impl AppState {
    /// Load configuration, resources, inflections and every trained L1.
    /// Configuration and resource failures are fatal; a corrupt model
    /// directory for one L1 is recorded and reported by `/v1/languages`.
    pub fn load(config: RunConfig) -> Result<Self, ServiceError> {
        let svc = config.service.clone();
        let pipeline = Pipeline::open(config)?;
        let inflections = match &svc.inflections {
            Some(p) => InflectionTable::load(p)?,
            None => InflectionTable::default(),
        };
        let trained = discover_models(&pipeline.layout.models_dir())?;
        let mut languages = BTreeMap::new();
        let mut load_errors = BTreeMap::new();
        for l1 in L1::ALL {
            let model_dir = pipeline.layout.models_dir().join(l1.code());
            let Some(available) = trained.get(&l1) else {
                if model_dir.is_dir() {
                    load_errors.insert(l1, format!("{} contains no models", model_dir.display()));
                }
                continue;
            };
            let seeds: Vec<u64> = if svc.seeds.is_empty() {
                vec![available[0]]
            } else {
                svc.seeds.clone()
            };
            match load_language(&pipeline, l1, &seeds) {
                Ok(m) => {
                    log::info!("serving {l1} with seeds {seeds:?}");
                    languages.insert(l1, m);
                }
                Err(e) => {
                    log::error!("cannot load {l1}: {e}");
                    load_errors.insert(l1, e.to_string());
                }
            }
        }
        Ok(AppState {
            pipeline,
            inflections,
            languages,
            load_errors,
            top_k: svc.top_k,
            max_text_bytes: svc.max_text_bytes,
        })
    }

    /// Default POS for a lemma among `available`: the inflection table's
    /// flag, then the corpus-dominant POS, then the first alternative.
    pub fn default_pos(&self, lemma: &str, available: &[String]) -> Option<String> {
        if let Some(p) = self.inflections.default_pos(lemma) {
            if available.iter().any(|a| a == p) {
                return Some(p.to_string());
            }
        }
        if let Some(dominant) = self
            .pipeline
            .bundle
            .frequency(lemma)
            .found()
            .and_then(|e| e.dominant_pos())
        {
            if let Some(p) = available.iter().find(|a| self.pipeline.tagmap.map(a) == dominant) {
                return Some(p.clone());
            }
        }
        available.first().cloned()
    }

    /// Report for `lemma` under `pos` (or the default POS), with the list
    /// of alternatives.
    pub fn resolve(&self, lm: &LanguageModel, lemma: &str, pos: Option<&str>, extension: bool) -> Resolution {
        let lemma = normalize_word(lemma);
        let alternatives = lm.pos_alternatives(&lemma, extension);
        if alternatives.is_empty() {
            return Resolution::UnknownLemma;
        }
        let pos = match pos {
            Some(p) => normalize_sense_pos(p),
            None => self.default_pos(&lemma, &alternatives).expect("non-empty alternatives"),
        };
        match self.report(lm, &lemma, &pos, extension) {
            Some(r) => Resolution::Found(r, alternatives),
            None => Resolution::UnknownPos(alternatives),
        }
    }

    fn report(&self, lm: &LanguageModel, lemma: &str, pos: &str, extension: bool) -> Option<Arc<WordReport>> {
        let (item, is_ext) = lm.item(lemma, pos, extension)?;
        let key = (is_ext, lemma.to_string(), pos.to_string());
        if let Some(r) = lm.cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Some(r.clone());
        }
        let report = Arc::new(self.score(lm, item, lemma, pos, is_ext));
        lm.cache
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .entry(key)
            .or_insert(report)
            .clone()
            .into()
    }

    fn score(&self, lm: &LanguageModel, item: &KvlItem, lemma: &str, pos: &str, extension: bool) -> WordReport {
        let p = &self.pipeline;
        let mut preds = Vec::new();
        let mut shares = Vec::new();
        let mut phis: Vec<Vec<f64>> = vec![Vec::new(); N_FEATURES];
        let mut row0 = None;
        for m in &lm.models {
            let vec = m.vectorizer.as_ref().expect("checked at load");
            let row = extract_features(item, &p.bundle, vec, &p.confusors);
            let a = attribute_all(m, std::slice::from_ref(&row))
                .expect("schema checked at load")
                .remove(0);
            preds.push(a.prediction);
            if !a.degenerate {
                shares.push(a.group_shares);
            }
            for (k, v) in a.phi.iter().enumerate() {
                phis[k].push(*v);
            }
            row0.get_or_insert(row);
        }
        let row = row0.expect("at least one model");
        let phi: Vec<f64> = phis.iter().map(|v| median(v).unwrap_or(0.0)).collect();
        let mut order: Vec<Feature> = Feature::ALL.to_vec();
        order.sort_by(|a, b| phi[b.index()].abs().total_cmp(&phi[a.index()].abs()).then(a.index().cmp(&b.index())));
        let top_features = order
            .into_iter()
            .take(self.top_k)
            .map(|f| FeatureContribution {
                feature: f.name().to_string(),
                group: f.group().name().to_string(),
                value: if f.is_categorical() {
                    row.category(f).map_or(serde_json::Value::Null, |s| s.into())
                } else {
                    row.get(f).map_or(serde_json::Value::Null, |v| v.into())
                },
                phi: phi[f.index()],
            })
            .collect();
        let predicted = median(&preds).expect("at least one model");
        WordReport {
            lemma: lemma.to_string(),
            pos: pos.to_string(),
            l1: lm.l1,
            item_id: item.item_id.clone(),
            source_word: item.source_word.clone(),
            clue_letter: item.clue_letter.to_string(),
            predicted,
            gold: item.difficulty,
            bin: bin_of(&lm.quintiles, predicted),
            gold_bin: item.difficulty.map(|g| bin_of(&lm.quintiles, g)),
            group_shares: shares_map(if shares.is_empty() { [0.25; 4] } else { median_shares(&shares) }),
            top_features,
            extension,
            n_models: preds.len(),
        }
    }

    /// Resolve an inflected surface form to a report: inflection-table
    /// readings first (default reading preferred), then the form itself as
    /// a lemma.
    pub fn resolve_token(&self, lm: &LanguageModel, form: &str, extension: bool) -> Option<Arc<WordReport>> {
        for c in self.inflections.candidates(form) {
            if let Some(r) = self.report(lm, &c.lemma, &c.pos, extension) {
                return Some(r);
            }
        }
        match self.resolve(lm, form, None, extension) {
            Resolution::Found(r, _) => Some(r),
            _ => None,
        }
    }
}
