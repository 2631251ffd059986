//! Run configuration: one TOML file describing inputs, outputs, seeds,
//! hyperparameters and analysis toggles. Relative paths resolve against the
//! directory containing the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Split, L1};
use crate::eval::EVAL_SEEDS;
use crate::model::GbdtConfig;
use crate::resources::ResourceConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// KVL files for one L1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KvlPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Extension-vocabulary CSVs in the KVL schema (service only).
    pub extension: Vec<PathBuf>,
}

impl KvlPaths {
    pub fn get(&self, split: Split) -> Option<&Path> {
        match split {
            Split::Train => self.train.as_deref(),
            Split::Dev => self.dev.as_deref(),
            Split::Test => self.test.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeConfig {
    pub l2: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { l2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub profiles: bool,
    pub simplex: bool,
    pub aitchison: bool,
    pub correlations: bool,
    pub dispersion: bool,
    pub frequency_similarity: bool,
    pub ablation: bool,
    pub svg: bool,
    pub rolling_window: usize,
    pub bandwidth_min: f64,
    pub bandwidth_max: f64,
    pub n_bandwidths: usize,
    pub w_min: f64,
    pub grid_resolution: usize,
    pub zero_delta: f64,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            profiles: true,
            simplex: true,
            aitchison: true,
            correlations: true,
            dispersion: true,
            frequency_similarity: true,
            ablation: true,
            svg: true,
            rolling_window: 10,
            bandwidth_min: 0.02,
            bandwidth_max: 1.0,
            n_bandwidths: 20,
            w_min: 5.0,
            grid_resolution: 60,
            zero_delta: 1e-4,
            bootstrap_resamples: 1000,
            bootstrap_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Maximum request body size for `/v1/annotate`, in bytes of text.
    pub max_text_bytes: usize,
    pub inflections: Option<PathBuf>,
    /// Allowed CORS origins; empty means any origin.
    pub cors_origins: Vec<String>,
    /// Seeds whose models are served; empty means the smallest trained seed.
    pub seeds: Vec<u64>,
    pub top_k: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            max_text_bytes: 64 * 1024,
            inflections: None,
            cors_origins: Vec::new(),
            seeds: Vec::new(),
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// L1s to process; empty means every L1 with a configured train split.
    pub l1s: Vec<L1>,
    pub seeds: Vec<u64>,
    pub header_mapping: Option<PathBuf>,
    pub pos_tagmap: Option<PathBuf>,
    pub resources: ResourceConfig,
    pub kvl: BTreeMap<L1, KvlPaths>,
    /// Per-L1 confusor regexes replacing the built-in defaults.
    pub confusors: BTreeMap<L1, Vec<String>>,
    pub gbdt: GbdtConfig,
    pub ridge: RidgeConfig,
    pub analysis: AnalysisConfig,
    pub service: ServiceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("out"),
            l1s: Vec::new(),
            seeds: EVAL_SEEDS.to_vec(),
            header_mapping: None,
            pos_tagmap: None,
            resources: ResourceConfig::default(),
            kvl: BTreeMap::new(),
            confusors: BTreeMap::new(),
            gbdt: GbdtConfig::default(),
            ridge: RidgeConfig::default(),
            analysis: AnalysisConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })
    }

    /// Read a config file and resolve its relative paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_relative(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.header_mapping.iter_mut().for_each(fix);
        self.pos_tagmap.iter_mut().for_each(fix);
        self.service.inflections.iter_mut().for_each(fix);
        for paths in self.kvl.values_mut() {
            paths.train.iter_mut().for_each(fix);
            paths.dev.iter_mut().for_each(fix);
            paths.test.iter_mut().for_each(fix);
            paths.extension.iter_mut().for_each(fix);
        }
        self.resources.resolve_relative(base);
    }

    /// L1s to process, in canonical order.
    pub fn active_l1s(&self) -> Vec<L1> {
        let mut out: Vec<L1> = if self.l1s.is_empty() {
            self.kvl
                .iter()
                .filter(|(_, p)| p.train.is_some())
                .map(|(l, _)| *l)
                .collect()
        } else {
            self.l1s.clone()
        };
        out.sort();
        out.dedup();
        out
    }

    pub fn kvl_path(&self, l1: L1, split: Split) -> Option<&Path> {
        self.kvl.get(&l1).and_then(|p| p.get(split))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.gbdt.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.ridge.l2 >= 0.0 && self.ridge.l2.is_finite()) {
            return bad("ridge.l2 must be non-negative".into());
        }
        for l1 in &self.l1s {
            if self.kvl_path(*l1, Split::Train).is_none() {
                return bad(format!("no train split configured for `{l1}`"));
            }
        }
        let a = &self.analysis;
        if a.rolling_window == 0 {
            return bad("analysis.rolling_window must be positive".into());
        }
        if !(a.bandwidth_min > 0.0 && a.bandwidth_max >= a.bandwidth_min && a.n_bandwidths >= 1) {
            return bad("analysis bandwidth grid is empty or non-positive".into());
        }
        if !(a.w_min >= 0.0 && a.w_min.is_finite()) {
            return bad("analysis.w_min must be non-negative".into());
        }
        if a.grid_resolution < 2 {
            return bad("analysis.grid_resolution must be at least 2".into());
        }
        if !(a.zero_delta > 0.0 && a.zero_delta < 1.0) {
            return bad("analysis.zero_delta must lie in (0, 1)".into());
        }
        if a.bootstrap_resamples == 0 {
            return bad("analysis.bootstrap_resamples must be positive".into());
        }
        if self.service.max_text_bytes == 0 {
            return bad("service.max_text_bytes must be positive".into());
        }
        Ok(())
    }
}
