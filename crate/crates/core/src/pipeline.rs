//! End-to-end orchestration: extract, train, evaluate, explain, analyze and
//! predict, with a fixed on-disk artifact layout under the output directory.
//!
//! ```text
//! features/<l1>_<split>.csv
//! models/<l1>/gbdt_seed<seed>.json, models/<l1>/ridge.json
//! eval/eval_report.json, eval/cross_l1.csv, eval/table1.csv
//! explain/<l1>/attributions_seed<seed>.csv, explain/table2_mean_abs_shap.csv
//! analysis/fig3_*, fig4_*, fig6_*, fig10_*, fig11_*, table2_spearman.csv,
//!          table4_dispersion.csv, table5_ablation_<l1>_<split>.csv, aitchison.csv
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    aitchison_total_variance, difficulty_correlations, feature_correlation_matrix, feature_gold_spearman,
    frequency_similarity_export, importance_profiles, log_space, nw_surface, pos_dispersion_study, profile_svg,
    simplex_svg, write_freq_sim_csv, AnalysisError, DispersionReport, GroupProfile, NwConfig, SimplexPoint,
    TotalVariance,
};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::{
    parse_kvl, pos_competition_flag, split_overlaps, ConfusorPatterns, CorpusError, HeaderMapping, KvlItem, KvlSplit,
    Split, TagMap, L1,
};
use crate::eval::{aggregate, cross_l1_matrix, gold_of, predict_items, score, write_cross_l1_csv, EvalError, EvalReport, Metrics, SeedMetrics};
use crate::explain::{
    attribute_all, mean_abs_shap_table, read_attributions_csv, write_attributions_csv, Attribution,
};
use crate::features::{
    extract_ablation, extract_features, fit_vectorizer_on_items, write_features_csv, CharUnigram, CharVectorizer,
    Feature, FeatureError, FeatureGroup, FeatureRow, ABLATION_COLUMNS,
};
use crate::model::{train_gbdt, train_ridge, ModelError, RidgeModel, TreeEnsemble};
use crate::resources::{load_resource_bundle, ResourceBundle, ResourceError};
use crate::stats::median;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
    #[error("missing artifact {path}; run `{command}` first")]
    MissingArtifact { path: PathBuf, command: &'static str },
    #[error("no {split} split configured for {l1}")]
    MissingSplit { l1: L1, split: Split },
    #[error("output directory {0} is locked by another process (remove the lock file if stale)")]
    Locked(PathBuf),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

impl PipelineError {
    /// 2 configuration, 3 data, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingSplit { .. } => 2,
            PipelineError::Model(ModelError::InvalidConfig(_)) => 2,
            PipelineError::Model(ModelError::SingularSystem | ModelError::LengthMismatch { .. }) => 4,
            PipelineError::Eval(EvalError::LengthMismatch(..)) => 4,
            PipelineError::Analysis(AnalysisError::Invalid(_)) => 4,
            PipelineError::Invariant(_) => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config_error",
            3 => "data_error",
            _ => "internal_error",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::Artifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Artifact paths under an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn features(&self, l1: L1, split: Split) -> PathBuf {
        self.root.join("features").join(format!("{l1}_{split}.csv"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model(&self, l1: L1, seed: u64) -> PathBuf {
        self.models_dir().join(l1.code()).join(format!("gbdt_seed{seed}.json"))
    }

    pub fn ridge(&self, l1: L1) -> PathBuf {
        self.models_dir().join(l1.code()).join("ridge.json")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn attributions(&self, l1: L1, seed: u64) -> PathBuf {
        self.root
            .join("explain")
            .join(l1.code())
            .join(format!("attributions_seed{seed}.csv"))
    }

    pub fn mean_abs_shap(&self) -> PathBuf {
        self.root.join("explain").join("table2_mean_abs_shap.csv")
    }

    pub fn analysis(&self, name: &str) -> PathBuf {
        self.root.join("analysis").join(name)
    }

    pub fn lock(&self) -> PathBuf {
        self.root.join(".lexdiff.lock")
    }
}

/// Exclusive ownership of an output directory for the lifetime of the value.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(layout: &Layout) -> Result<Self> {
        std::fs::create_dir_all(&layout.root).map_err(io_err(&layout.root))?;
        let path = layout.lock();
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Seeds with a trained model on disk, per L1.
pub fn discover_models(models_dir: &Path) -> Result<BTreeMap<L1, Vec<u64>>> {
    let mut out = BTreeMap::new();
    for l1 in L1::ALL {
        let dir = models_dir.join(l1.code());
        if !dir.is_dir() {
            continue;
        }
        let mut seeds = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let name = entry.map_err(io_err(&dir))?.file_name();
            let name = name.to_string_lossy();
            if let Some(seed) = name
                .strip_prefix("gbdt_seed")
                .and_then(|s| s.strip_suffix(".json"))
                .and_then(|s| s.parse::<u64>().ok())
            {
                seeds.push(seed);
            }
        }
        seeds.sort_unstable();
        if !seeds.is_empty() {
            out.insert(l1, seeds);
        }
    }
    Ok(out)
}

fn load_model(path: &Path) -> Result<TreeEnsemble> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact {
            path: path.to_path_buf(),
            command: "train",
        });
    }
    Ok(TreeEnsemble::load(path)?)
}

/// Ridge and per-seed GBDT results for one summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeReport {
    pub l1: L1,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub gbdt: Vec<EvalReport>,
    pub ridge: Vec<RidgeReport>,
}

/// Prediction for one item: medians across seed models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPrediction {
    pub item_id: String,
    pub l1: L1,
    pub target_word: String,
    pub source_word: String,
    pub difficulty: f64,
    pub group_shares: BTreeMap<FeatureGroup, f64>,
    pub degenerate: bool,
    pub n_models: usize,
}

/// Per-group median over seeds, re-closed to sum to one.
pub fn median_shares(shares: &[[f64; 4]]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for (g, v) in m.iter_mut().enumerate() {
        let col: Vec<f64> = shares.iter().map(|s| s[g]).collect();
        *v = median(&col).unwrap_or(0.25);
    }
    let total: f64 = m.iter().sum();
    if total > 0.0 {
        m.map(|v| v / total)
    } else {
        [0.25; 4]
    }
}

pub fn shares_map(shares: [f64; 4]) -> BTreeMap<FeatureGroup, f64> {
    FeatureGroup::ALL.into_iter().zip(shares).collect()
}

/// Loaded configuration, resources and corpus adapters.
pub struct Pipeline {
    pub config: RunConfig,
    pub layout: Layout,
    pub bundle: ResourceBundle,
    pub mapping: HeaderMapping,
    pub tagmap: TagMap,
    pub confusors: ConfusorPatterns,
}

impl Pipeline {
    /// Validate the config and load everything shared by all commands.
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mapping = match &config.header_mapping {
            None => HeaderMapping::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(io_err(p))?;
                HeaderMapping::from_toml(&text)
                    .map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
        };
        let tagmap = match &config.pos_tagmap {
            None => TagMap::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(io_err(p))?;
                TagMap::parse(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
        };
        let confusors = if config.confusors.is_empty() {
            ConfusorPatterns::default()
        } else {
            ConfusorPatterns::from_lists(&config.confusors)
                .map_err(|e| ConfigError::Invalid(format!("confusor pattern: {e}")))?
        };
        let bundle = load_resource_bundle(&config.resources)?;
        for p in &bundle.provenance {
            log::info!("loaded {} ({} rows, {} duplicates) from {}", p.kind, p.rows, p.duplicates, p.path.display());
        }
        Ok(Pipeline {
            layout: Layout::new(&config.output_dir),
            config,
            bundle,
            mapping,
            tagmap,
            confusors,
        })
    }

    pub fn l1s(&self) -> Vec<L1> {
        self.config.active_l1s()
    }

    pub fn split(&self, l1: L1, split: Split) -> Result<KvlSplit> {
        let path = self
            .config
            .kvl_path(l1, split)
            .ok_or(PipelineError::MissingSplit { l1, split })?;
        let (s, diags) = parse_kvl(path, l1, split, &self.mapping)?;
        for d in &diags {
            log::warn!("{}:{}: {}", path.display(), d.line, d.message);
        }
        Ok(s)
    }

    pub fn has_split(&self, l1: L1, split: Split) -> bool {
        self.config.kvl_path(l1, split).is_some()
    }

    /// Character vectorizer fitted on the L1's training split.
    pub fn vectorizer(&self, l1: L1) -> Result<CharVectorizer> {
        Ok(fit_vectorizer_on_items(&self.split(l1, Split::Train)?.items)?)
    }

    pub fn features(&self, items: &[KvlItem], vec: &CharVectorizer) -> Vec<FeatureRow> {
        items
            .par_iter()
            .map(|i| extract_features(i, &self.bundle, vec, &self.confusors))
            .collect()
    }

    fn seeds_or_default(&self, seeds: Option<&[u64]>) -> Vec<u64> {
        seeds.map_or_else(|| self.config.seeds.clone(), <[u64]>::to_vec)
    }

    /// Write `features/<l1>_<split>.csv` for every configured split.
    pub fn extract(&self, l1s: &[L1], splits: &[Split]) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for &l1 in l1s {
            let vec = self.vectorizer(l1)?;
            for &split in splits {
                if !self.has_split(l1, split) {
                    log::warn!("skipping {l1}/{split}: not configured");
                    continue;
                }
                let items = self.split(l1, split)?.items;
                let rows = self.features(&items, &vec);
                let path = self.layout.features(l1, split);
                write_features_csv(&rows, create(&path)?)?;
                log::info!("wrote {} rows to {}", rows.len(), path.display());
                written.push(path);
            }
        }
        Ok(written)
    }

    /// Train one GBDT per seed plus the ridge baseline for each L1.
    pub fn train(&self, l1s: &[L1], seeds: Option<&[u64]>) -> Result<Vec<PathBuf>> {
        let seeds = self.seeds_or_default(seeds);
        let mut written = Vec::new();
        for &l1 in l1s {
            let train = self.split(l1, Split::Train)?;
            let others: Vec<KvlSplit> = [Split::Dev, Split::Test]
                .into_iter()
                .filter(|s| self.has_split(l1, *s))
                .map(|s| self.split(l1, s))
                .collect::<Result<_>>()?;
            let mut all: Vec<&KvlSplit> = vec![&train];
            all.extend(others.iter());
            for (a, b, shared) in split_overlaps(&all) {
                log::warn!("{l1}: {} target words shared between {a} and {b}", shared.len());
            }
            let vec = fit_vectorizer_on_items(&train.items)?;
            let rows = self.features(&train.items, &vec);
            let y = gold_of(&train.items)?;
            for &seed in &seeds {
                let cfg = crate::model::GbdtConfig {
                    seed,
                    ..self.config.gbdt.clone()
                };
                let mut model = train_gbdt(&rows, &y, &cfg)?;
                model.l1 = Some(l1);
                model.vectorizer = Some(vec.clone());
                let path = self.layout.model(l1, seed);
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
                }
                model.save(&path)?;
                log::info!(
                    "{l1} seed {seed}: {} trees, train rmse {:.4}",
                    model.trees.len(),
                    model.summary.train_rmse
                );
                written.push(path);
            }
            let mut ridge = train_ridge(&rows, &y, self.config.ridge.l2)?;
            ridge.l1 = Some(l1);
            ridge.vectorizer = Some(vec);
            let path = self.layout.ridge(l1);
            write_text(&path, &(ridge.to_json()? + "\n"))?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn load_models(&self, l1: L1, seeds: &[u64]) -> Result<Vec<(u64, TreeEnsemble)>> {
        seeds
            .iter()
            .map(|&s| Ok((s, load_model(&self.layout.model(l1, s))?)))
            .collect()
    }

    fn load_ridge(&self, l1: L1) -> Result<RidgeModel> {
        let path = self.layout.ridge(l1);
        if !path.exists() {
            return Err(PipelineError::MissingArtifact { path, command: "train" });
        }
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(RidgeModel::from_json(&text)?)
    }

    /// Per-L1 RMSE and Pearson r, plus the cross-L1 matrix, on the test splits.
    pub fn evaluate(&self, l1s: &[L1], seeds: Option<&[u64]>) -> Result<EvaluationSummary> {
        let seeds = self.seeds_or_default(seeds);
        let mut models = BTreeMap::new();
        let mut tests = BTreeMap::new();
        for &l1 in l1s {
            models.insert(l1, self.load_models(l1, &seeds)?);
            tests.insert(l1, self.split(l1, Split::Test)?.items);
        }
        let cells = cross_l1_matrix(&models, &tests, &self.bundle, &self.confusors)?;
        let mut ridge = Vec::new();
        for &l1 in l1s {
            let m = self.load_ridge(l1)?;
            let vec = m.vectorizer.as_ref().ok_or_else(|| EvalError::MissingVectorizer(l1.code().into()))?;
            let items = &tests[&l1];
            let pred = m.predict_many(&self.features(items, vec));
            ridge.push(RidgeReport {
                l1,
                metrics: score(&pred, &gold_of(items)?)?,
            });
        }
        let summary = EvaluationSummary {
            gbdt: cells.values().cloned().collect(),
            ridge,
        };
        let dir = self.layout.eval_dir();
        write_text(
            &dir.join("eval_report.json"),
            &(serde_json::to_string_pretty(&summary).map_err(ModelError::from)? + "\n"),
        )?;
        let path = dir.join("cross_l1.csv");
        write_cross_l1_csv(&cells, create(&path)?).map_err(csv_err(&path))?;
        let path = dir.join("table1.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        let res: Result<(), csv::Error> = (|| {
            w.write_record(["model", "l1", "rmse", "r", "rmse_p5", "rmse_p95", "n_items", "n_seeds"])?;
            for r in &summary.ridge {
                w.write_record([
                    "ridge".to_string(),
                    r.l1.to_string(),
                    r.metrics.rmse.to_string(),
                    opt(r.metrics.pearson),
                    String::new(),
                    String::new(),
                    r.metrics.n_items.to_string(),
                    String::new(),
                ])?;
            }
            for r in summary.gbdt.iter().filter(|r| r.l1_train == r.l1_test) {
                w.write_record([
                    "gbdt".to_string(),
                    r.l1_test.to_string(),
                    r.rmse_median.to_string(),
                    opt(r.pearson_median),
                    r.rmse_p5.to_string(),
                    r.rmse_p95.to_string(),
                    r.n_items.to_string(),
                    r.seeds.len().to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(csv_err(&path))?;
        Ok(summary)
    }

    /// Attributions on the test split for each seed model and the
    /// mean-|SHAP| table (median across seeds).
    pub fn explain(&self, l1s: &[L1], seeds: Option<&[u64]>) -> Result<BTreeMap<L1, Vec<Vec<Attribution>>>> {
        let seeds = self.seeds_or_default(seeds);
        let mut out = BTreeMap::new();
        for &l1 in l1s {
            let items = self.split(l1, Split::Test)?.items;
            let mut per_seed = Vec::new();
            for (seed, model) in self.load_models(l1, &seeds)? {
                let vec = model
                    .vectorizer
                    .as_ref()
                    .ok_or_else(|| EvalError::MissingVectorizer(l1.code().into()))?;
                let attrs = attribute_all(&model, &self.features(&items, vec))?;
                for a in &attrs {
                    let gap = (a.prediction - a.base_value - a.phi.iter().sum::<f64>()).abs();
                    if !(gap <= 1e-6 * a.prediction.abs().max(1.0)) {
                        return Err(PipelineError::Invariant(format!(
                            "local accuracy off by {gap} for item {} ({l1}, seed {seed})",
                            a.item_id
                        )));
                    }
                }
                let path = self.layout.attributions(l1, seed);
                write_attributions_csv(&attrs, create(&path)?).map_err(csv_err(&path))?;
                per_seed.push(attrs);
            }
            out.insert(l1, per_seed);
        }
        let tables: Vec<(L1, [f64; crate::features::N_FEATURES])> =
            out.iter().map(|(l1, a)| (*l1, mean_abs_shap_table(a))).collect();
        let path = self.layout.mean_abs_shap();
        let mut w = csv::Writer::from_writer(create(&path)?);
        let res: Result<(), csv::Error> = (|| {
            let mut header = vec!["feature".to_string(), "group".to_string()];
            header.extend(tables.iter().map(|(l, _)| l.to_string()));
            w.write_record(&header)?;
            for f in Feature::ALL {
                let mut rec = vec![f.name().to_string(), f.group().name().to_string()];
                rec.extend(tables.iter().map(|(_, t)| t[f.index()].to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(csv_err(&path))?;
        Ok(out)
    }

    fn read_attributions(&self, l1: L1, seeds: &[u64]) -> Result<Vec<Vec<Attribution>>> {
        seeds
            .iter()
            .map(|&s| {
                let path = self.layout.attributions(l1, s);
                if !path.exists() {
                    return Err(PipelineError::MissingArtifact { path, command: "explain" });
                }
                let f = File::open(&path).map_err(io_err(&path))?;
                read_attributions_csv(f).map_err(|reason| PipelineError::Artifact { path, reason })
            })
            .collect()
    }

    /// Every analysis table and plot for the given L1s.
    pub fn analyze(&self, l1s: &[L1], seeds: Option<&[u64]>) -> Result<Vec<PathBuf>> {
        let seeds = self.seeds_or_default(seeds);
        let a = &self.config.analysis;
        let mut written = Vec::new();
        let mut group_means = Vec::new();
        let mut totvars: Vec<(L1, TotalVariance)> = Vec::new();
        let mut dispersion: Vec<DispersionReport> = Vec::new();
        let mut spearman_cols: Vec<(L1, Vec<(Feature, Option<f64>)>)> = Vec::new();
        let mut all_items: BTreeMap<L1, Vec<KvlItem>> = BTreeMap::new();

        for &l1 in l1s {
            let train = self.split(l1, Split::Train)?.items;
            let test = self.split(l1, Split::Test)?.items;
            let model = load_model(&self.layout.model(l1, seeds[0]))?;
            let vec = model
                .vectorizer
                .clone()
                .ok_or_else(|| EvalError::MissingVectorizer(l1.code().into()))?;
            let rows = self.features(&test, &vec);
            let gold: Vec<Option<f64>> = test.iter().map(|i| i.difficulty).collect();
            let gold_by_id: BTreeMap<&str, f64> = test
                .iter()
                .filter_map(|i| Some((i.item_id.as_str(), i.difficulty?)))
                .collect();
            let per_seed = self.read_attributions(l1, &seeds)?;
            let profile = importance_profiles(&per_seed, a.rolling_window);
            group_means.push((l1, profile.group_means));

            if a.profiles {
                let path = self.layout.analysis(&format!("fig3_profiles_{l1}.csv"));
                write_profile_csv(&profile, &path)?;
                written.push(path);
                if a.svg {
                    let path = self.layout.analysis(&format!("fig3_profiles_{l1}.svg"));
                    write_text(&path, &profile_svg(&profile))?;
                    written.push(path);
                }
            }

            let points: Vec<SimplexPoint> = profile
                .items
                .iter()
                .map(|p| {
                    let attr = Attribution {
                        item_id: p.item_id.clone(),
                        base_value: 0.0,
                        prediction: 0.0,
                        phi: Vec::new(),
                        group_shares: p.shares,
                        degenerate: false,
                    };
                    crate::analysis::to_simplex(&attr, gold_by_id.get(p.item_id.as_str()).copied())
                })
                .collect();
            if a.simplex {
                let path = self.layout.analysis(&format!("fig4_simplex_{l1}.csv"));
                write_simplex_csv(&points, &path)?;
                written.push(path);
                let cfg = NwConfig {
                    bandwidths: log_space(a.bandwidth_min, a.bandwidth_max, a.n_bandwidths),
                    w_min: a.w_min,
                    resolution: a.grid_resolution,
                };
                let labelled: Vec<SimplexPoint> = points.iter().filter(|p| p.gold.is_some()).cloned().collect();
                match nw_surface(&labelled, &cfg) {
                    Ok(surface) => {
                        let path = self.layout.analysis(&format!("fig4_surface_{l1}.csv"));
                        let mut w = csv::Writer::from_writer(create(&path)?);
                        let res: Result<(), csv::Error> = (|| {
                            w.write_record(["x", "y", "value", "weight", "bandwidth"])?;
                            for c in &surface.cells {
                                w.write_record([
                                    c.x.to_string(),
                                    c.y.to_string(),
                                    opt(c.value),
                                    c.weight.to_string(),
                                    surface.bandwidth.to_string(),
                                ])?;
                            }
                            w.flush()?;
                            Ok(())
                        })();
                        res.map_err(csv_err(&path))?;
                        written.push(path);
                        let path = self.layout.analysis(&format!("fig4_bandwidth_{l1}.csv"));
                        let mut text = String::from("bandwidth,loo_mse\n");
                        for (h, s) in &surface.loo_scores {
                            text.push_str(&format!("{h},{s}\n"));
                        }
                        write_text(&path, &text)?;
                        written.push(path);
                        if a.svg {
                            let path = self.layout.analysis(&format!("fig4_simplex_{l1}.svg"));
                            write_text(&path, &simplex_svg(&points, Some(&surface)))?;
                            written.push(path);
                        }
                    }
                    Err(e) => log::warn!("{l1}: no difficulty surface: {e}"),
                }
            }

            if a.aitchison {
                let comps: Vec<Vec<f64>> = points.iter().map(|p| vec![p.familiarity, p.meaning, p.form]).collect();
                match aitchison_total_variance(&comps, a.zero_delta, a.bootstrap_resamples, a.bootstrap_seed) {
                    Ok(tv) => totvars.push((l1, tv)),
                    Err(e) => log::warn!("{l1}: no Aitchison variance: {e}"),
                }
            }

            if a.correlations {
                let m = feature_correlation_matrix(&rows);
                let path = self.layout.analysis(&format!("fig6_feature_corr_{l1}.csv"));
                let mut text = String::from("feature");
                for f in &m.features {
                    text.push(',');
                    text.push_str(f.name());
                }
                text.push('\n');
                for (f, row) in m.features.iter().zip(&m.values) {
                    text.push_str(f.name());
                    for v in row {
                        text.push(',');
                        text.push_str(&opt(*v));
                    }
                    text.push('\n');
                }
                write_text(&path, &text)?;
                written.push(path);
                let (r, g): (Vec<FeatureRow>, Vec<f64>) = rows
                    .iter()
                    .zip(&gold)
                    .filter_map(|(r, g)| Some((r.clone(), (*g)?)))
                    .unzip();
                spearman_cols.push((l1, feature_gold_spearman(&r, &g)));
                let mut every = train.clone();
                if self.has_split(l1, Split::Dev) {
                    every.extend(self.split(l1, Split::Dev)?.items);
                }
                every.extend(test.iter().cloned());
                all_items.insert(l1, every);
            }

            let median_pred = median_predictions(&per_seed);
            if a.dispersion {
                if let Some(freq) = &self.bundle.frequency {
                    let mut errors = Vec::new();
                    let mut flags = Vec::new();
                    for item in &test {
                        if let (Some(g), Some(p)) = (item.difficulty, median_pred.get(item.item_id.as_str())) {
                            errors.push(g - p);
                            flags.push(pos_competition_flag(item, freq, &self.tagmap));
                        }
                    }
                    match pos_dispersion_study(l1, &errors, &flags) {
                        Ok(r) => dispersion.push(r),
                        Err(e) => log::warn!("{l1}: no dispersion study: {e}"),
                    }
                } else {
                    log::warn!("{l1}: frequency norms absent; skipping dispersion study");
                }
            }

            let unigram = CharUnigram::fit(train.iter().map(|i| i.target_word.as_str()));
            if a.frequency_similarity {
                let attrs = median_attributions(&per_seed);
                let ordered: Vec<Attribution> = test
                    .iter()
                    .map(|i| {
                        attrs.get(i.item_id.as_str()).cloned().ok_or_else(|| PipelineError::Artifact {
                            path: self.layout.attributions(l1, seeds[0]),
                            reason: format!("no attribution for item {}", i.item_id),
                        })
                    })
                    .collect::<Result<_>>()?;
                let ablation: Vec<_> = test.iter().map(|i| extract_ablation(i, &self.bundle, &unigram)).collect();
                let export = frequency_similarity_export(&rows, &ordered, &ablation, &gold);
                let path = self.layout.analysis(&format!("fig11_freq_sim_{l1}.csv"));
                write_freq_sim_csv(&export, create(&path)?).map_err(csv_err(&path))?;
                written.push(path);
            }
            if a.ablation {
                for split in [Split::Dev, Split::Test] {
                    if !self.has_split(l1, split) {
                        continue;
                    }
                    let items = if split == Split::Test { test.clone() } else { self.split(l1, split)?.items };
                    let path = self.layout.analysis(&format!("table5_ablation_{l1}_{split}.csv"));
                    let mut w = csv::Writer::from_writer(create(&path)?);
                    let res: Result<(), csv::Error> = (|| {
                        let mut header = vec!["item_id"];
                        header.extend(ABLATION_COLUMNS);
                        header.push("gold");
                        w.write_record(&header)?;
                        for i in &items {
                            let r = extract_ablation(i, &self.bundle, &unigram);
                            let mut rec = vec![r.item_id.clone()];
                            rec.extend(r.values().iter().map(|v| opt(*v)));
                            rec.push(opt(i.difficulty));
                            w.write_record(&rec)?;
                        }
                        w.flush()?;
                        Ok(())
                    })();
                    res.map_err(csv_err(&path))?;
                    written.push(path);
                }
            }
        }

        if a.profiles {
            let path = self.layout.analysis("fig3_group_means.csv");
            let mut text = String::from("l1");
            for g in FeatureGroup::ALL {
                text.push(',');
                text.push_str(g.name());
            }
            text.push('\n');
            for (l1, m) in &group_means {
                text.push_str(l1.code());
                for v in m {
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
            write_text(&path, &text)?;
            written.push(path);
        }
        if a.aitchison && !totvars.is_empty() {
            let path = self.layout.analysis("aitchison.csv");
            let mut text = String::from("l1,totvar,ci_low,ci_high,half_width,n,resamples,delta\n");
            for (l1, t) in &totvars {
                text.push_str(&format!(
                    "{l1},{},{},{},{},{},{},{}\n",
                    t.totvar,
                    t.ci_low,
                    t.ci_high,
                    t.half_width(),
                    t.n,
                    t.resamples,
                    t.delta
                ));
            }
            write_text(&path, &text)?;
            written.push(path);
        }
        if a.correlations && !spearman_cols.is_empty() {
            let path = self.layout.analysis("table2_spearman.csv");
            let mut text = String::from("feature,group");
            for (l1, _) in &spearman_cols {
                text.push_str(&format!(",{l1}"));
            }
            text.push('\n');
            for (k, f) in crate::analysis::numeric_features().iter().enumerate() {
                text.push_str(&format!("{},{}", f.name(), f.group().name()));
                for (_, col) in &spearman_cols {
                    text.push(',');
                    text.push_str(&opt(col[k].1));
                }
                text.push('\n');
            }
            write_text(&path, &text)?;
            written.push(path);
            let path = self.layout.analysis("fig10_difficulty_corr.csv");
            let mut text = String::from("l1_a,l1_b,n_shared,r\n");
            for p in difficulty_correlations(&all_items) {
                text.push_str(&format!("{},{},{},{}\n", p.a, p.b, p.n_shared, opt(p.r)));
            }
            write_text(&path, &text)?;
            written.push(path);
        }
        if a.dispersion && !dispersion.is_empty() {
            let path = self.layout.analysis("table4_dispersion.csv");
            let mut text = String::from("l1,n_no,n_yes,std_no,std_yes,ratio,welch_p,wmw_p,bf_p,fk_p\n");
            for r in &dispersion {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.l1, r.n_no, r.n_yes, r.std_no, r.std_yes, r.ratio, r.welch_p, r.wmw_p, r.bf_p, r.fk_p
                ));
            }
            write_text(&path, &text)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Score arbitrary items with every available seed model of their L1.
    pub fn predict(&self, items: &[KvlItem], seeds: Option<&[u64]>) -> Result<Vec<ItemPrediction>> {
        let available = discover_models(&self.layout.models_dir())?;
        let mut by_l1: BTreeMap<L1, Vec<&KvlItem>> = BTreeMap::new();
        for i in items {
            by_l1.entry(i.l1).or_default().push(i);
        }
        let mut out: BTreeMap<String, ItemPrediction> = BTreeMap::new();
        for (l1, group) in by_l1 {
            let seeds: Vec<u64> = match seeds {
                Some(s) => s.to_vec(),
                None => available.get(&l1).cloned().unwrap_or_default(),
            };
            if seeds.is_empty() {
                return Err(PipelineError::MissingArtifact {
                    path: self.layout.models_dir().join(l1.code()),
                    command: "train",
                });
            }
            let models = self.load_models(l1, &seeds)?;
            let owned: Vec<KvlItem> = group.iter().map(|i| (*i).clone()).collect();
            let per_seed: Vec<Vec<Attribution>> = models
                .iter()
                .map(|(_, m)| {
                    let vec = m
                        .vectorizer
                        .as_ref()
                        .ok_or_else(|| EvalError::MissingVectorizer(l1.code().into()))?;
                    Ok(attribute_all(m, &self.features(&owned, vec))?)
                })
                .collect::<Result<_>>()?;
            for (k, item) in owned.iter().enumerate() {
                let preds: Vec<f64> = per_seed.iter().map(|s| s[k].prediction).collect();
                let shares: Vec<[f64; 4]> = per_seed
                    .iter()
                    .filter(|s| !s[k].degenerate)
                    .map(|s| s[k].group_shares)
                    .collect();
                let degenerate = shares.is_empty();
                out.insert(
                    format!("{}\u{0}{}", l1.code(), item.item_id),
                    ItemPrediction {
                        item_id: item.item_id.clone(),
                        l1,
                        target_word: item.target_word.clone(),
                        source_word: item.source_word.clone(),
                        difficulty: median(&preds).ok_or_else(|| PipelineError::Invariant("no predictions".into()))?,
                        group_shares: shares_map(if degenerate { [0.25; 4] } else { median_shares(&shares) }),
                        degenerate,
                        n_models: preds.len(),
                    },
                );
            }
        }
        let order: BTreeMap<String, usize> = items
            .iter()
            .enumerate()
            .map(|(k, i)| (format!("{}\u{0}{}", i.l1.code(), i.item_id), k))
            .collect();
        let mut v: Vec<ItemPrediction> = out.into_values().collect();
        v.sort_by_key(|p| order[&format!("{}\u{0}{}", p.l1.code(), p.item_id)]);
        Ok(v)
    }
}

/// Per-item median prediction across seeds.
pub fn median_predictions(per_seed: &[Vec<Attribution>]) -> BTreeMap<&str, f64> {
    let mut acc: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in per_seed {
        for a in s {
            acc.entry(a.item_id.as_str()).or_default().push(a.prediction);
        }
    }
    acc.into_iter().filter_map(|(k, v)| Some((k, median(&v)?))).collect()
}

/// Per-item, per-feature median Shapley values across seeds.
pub fn median_attributions(per_seed: &[Vec<Attribution>]) -> BTreeMap<&str, Attribution> {
    let mut acc: BTreeMap<&str, Vec<&Attribution>> = BTreeMap::new();
    for s in per_seed {
        for a in s {
            acc.entry(a.item_id.as_str()).or_default().push(a);
        }
    }
    acc.into_iter()
        .map(|(k, v)| {
            let col = |f: &dyn Fn(&Attribution) -> f64| median(&v.iter().map(|a| f(a)).collect::<Vec<_>>()).unwrap();
            let n = v[0].phi.len();
            let phi: Vec<f64> = (0..n).map(|j| col(&|a| a.phi[j])).collect();
            let (group_shares, degenerate) = crate::explain::group_importance(&phi);
            (
                k,
                Attribution {
                    item_id: k.to_string(),
                    base_value: col(&|a| a.base_value),
                    prediction: col(&|a| a.prediction),
                    phi,
                    group_shares,
                    degenerate,
                },
            )
        })
        .collect()
}

fn write_profile_csv(profile: &GroupProfile, path: &Path) -> Result<()> {
    let mut text = String::from("rank,item_id");
    for g in FeatureGroup::ALL {
        text.push_str(&format!(",share_{}", g.name()));
    }
    for g in FeatureGroup::ALL {
        text.push_str(&format!(",rolling_{}", g.name()));
    }
    text.push('\n');
    for it in &profile.items {
        text.push_str(&format!("{},{}", it.rank, csv_field(&it.item_id)));
        for v in it.shares.iter().chain(&it.rolling) {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_simplex_csv(points: &[SimplexPoint], path: &Path) -> Result<()> {
    let mut text = String::from("item_id,familiarity,meaning,form,x,y,gold\n");
    for p in points {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_field(&p.item_id),
            p.familiarity,
            p.meaning,
            p.form,
            p.x,
            p.y,
            opt(p.gold)
        ));
    }
    write_text(path, &text)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Seed aggregation helper re-exported for callers that score in memory.
pub fn aggregate_seeds(l1_train: L1, l1_test: L1, per_seed: Vec<SeedMetrics>) -> Result<EvalReport> {
    Ok(aggregate(l1_train, l1_test, "gbdt", per_seed)?)
}

/// Predictions of one model on items, using the model's own vectorizer.
pub fn predict_with(model: &TreeEnsemble, items: &[KvlItem], bundle: &ResourceBundle, confusors: &ConfusorPatterns) -> Result<Vec<f64>> {
    Ok(predict_items(model, items, bundle, confusors)?)
}
