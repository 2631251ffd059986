//! `lexdiff`: extract, train, evaluate, explain, analyze, predict and serve.
//!
//! Logs go to stderr. Artifacts go to the output directory. Only `predict`
//! writes to stdout.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexdiff_core::config::RunConfig;
use lexdiff_core::corpus::{parse_kvl_reader, CorpusError, KvlItem, Split, L1};
use lexdiff_core::pipeline::{discover_models, OutputLock, Pipeline, PipelineError};
use lexdiff_service::{AppState, ServiceError};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "lexdiff", version, about = "L1-specific English lexical difficulty with feature-group attributions")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Run configuration (TOML). Flags override values from the file.
    #[arg(long, short = 'c', global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// L1s to process (es, de, zh); comma-separated or repeated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "L1")]
    l1: Vec<L1>,
    /// Model seeds; comma-separated or repeated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "SEED")]
    seeds: Vec<u64>,
    /// More log output (repeat for trace).
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(long, short = 'q', global = true, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write per-L1, per-split feature CSVs.
    Extract {
        /// Splits to extract; comma-separated. Default: every configured split.
        #[arg(long, value_delimiter = ',', value_name = "SPLIT", value_parser = parse_split)]
        split: Vec<Split>,
    },
    /// Train one GBDT per L1 and seed, plus the ridge baseline.
    Train(TrainArgs),
    /// RMSE and Pearson r on the test splits, with the cross-L1 matrix.
    Evaluate,
    /// Per-item attributions on the test splits and the mean |SHAP| table.
    Explain,
    /// Profiles, simplex surfaces, dispersion, correlations and ablations.
    Analyze(AnalyzeArgs),
    /// Score a word list or KVL-format CSV and print JSON to stdout.
    Predict {
        /// KVL CSV (with a header naming source_word and target_word) or a
        /// word list with one `target[,source[,pos]]` entry per line.
        input: PathBuf,
    },
    /// Serve the HTTP JSON API over trained models.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Boosting iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Maximum tree depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// L2 regularization on leaf values.
    #[arg(long)]
    l2_leaf_reg: Option<f64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Skip SVG plots and write CSVs only.
    #[arg(long)]
    no_svg: bool,
    /// Bootstrap resamples for the total-variance intervals.
    #[arg(long)]
    bootstrap_resamples: Option<usize>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Address to bind, e.g. 127.0.0.1:8080.
    #[arg(long)]
    bind: Option<String>,
    /// Inflection table (TSV: form, lemma, pos, is_default).
    #[arg(long, value_name = "FILE")]
    inflections: Option<PathBuf>,
    /// Allowed CORS origin; repeat for several. Default: any origin.
    #[arg(long = "cors-origin", value_name = "ORIGIN")]
    cors_origins: Vec<String>,
    /// Maximum text size accepted by /v1/annotate, in bytes.
    #[arg(long)]
    max_text_bytes: Option<usize>,
    /// Number of top features per word report.
    #[arg(long)]
    top_k: Option<usize>,
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write to stdout: {0}")]
    Stdout(std::io::Error),
    #[error("cannot start async runtime: {0}")]
    Runtime(std::io::Error),
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let code = match self {
            CliError::Pipeline(e) => e.exit_code(),
            CliError::Service(e) => e.exit_code(),
            CliError::Usage(_) => 2,
            CliError::Stdout(_) | CliError::Runtime(_) => 4,
        };
        code as u8
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config_error",
            3 => "data_error",
            _ => "internal_error",
        }
    }
}

fn report(err: &CliError) -> ExitCode {
    let body = json!({"error": {"kind": err.kind(), "message": err.to_string(), "exit_code": err.exit_code()}});
    eprintln!("{body}");
    ExitCode::from(err.exit_code())
}

fn init_logging(g: &GlobalArgs) {
    let level = if g.quiet {
        "error"
    } else {
        match g.verbose {
            0 => "info",
            1 => "debug",
            _ => "trace",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(PipelineError::from)?,
        None => {
            let mut c = RunConfig::default();
            c.resolve_relative(&std::env::current_dir().unwrap_or_else(|_| PathBuf::from(".")));
            c
        }
    };
    if let Some(d) = &g.output_dir {
        cfg.output_dir = d.clone();
    }
    if !g.l1.is_empty() {
        cfg.l1s = g.l1.clone();
    }
    if !g.seeds.is_empty() {
        cfg.seeds = g.seeds.clone();
    }
    Ok(cfg)
}

/// L1s and seeds for commands that consume trained models. Explicit flags
/// win; otherwise every selected L1 with models on disk, and the seeds they
/// all share.
fn trained_selection(p: &Pipeline, g: &GlobalArgs) -> Result<(Vec<L1>, Vec<u64>), CliError> {
    let models_dir = p.layout.models_dir();
    let available = if models_dir.exists() { discover_models(&models_dir)? } else { BTreeMap::new() };
    let l1s: Vec<L1> = if g.l1.is_empty() {
        p.l1s().into_iter().filter(|l| available.contains_key(l)).collect()
    } else {
        p.l1s()
    };
    if l1s.is_empty() {
        return Err(PipelineError::MissingArtifact { path: models_dir, command: "train" }.into());
    }
    if !g.seeds.is_empty() {
        return Ok((l1s, g.seeds.clone()));
    }
    let mut shared: Option<Vec<u64>> = None;
    for l in &l1s {
        let have = available.get(l).cloned().unwrap_or_default();
        shared = Some(match shared {
            None => have,
            Some(s) => s.into_iter().filter(|x| have.contains(x)).collect(),
        });
    }
    let seeds = shared.unwrap_or_default();
    if seeds.is_empty() {
        return Err(PipelineError::MissingArtifact { path: models_dir, command: "train" }.into());
    }
    Ok((l1s, seeds))
}

fn write_run_config(p: &Pipeline) -> Result<(), CliError> {
    let path = p.layout.root.join("run_config.toml");
    std::fs::write(&path, p.config.to_toml()).map_err(|source| PipelineError::Io { path, source })?;
    Ok(())
}

/// One item per non-empty, non-comment line: `target[,source[,pos]]`
/// (tab also accepted as separator).
fn parse_wordlist(text: &str, l1: L1) -> Vec<KvlItem> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(k, line)| {
            let mut f = line.split(['\t', ',']).map(str::trim);
            let target = f.next().unwrap_or_default();
            let source = f.next().unwrap_or_default();
            let pos = f.next().unwrap_or_default();
            KvlItem::new(format!("w{:05}", k + 1), l1, source, pos, "", target, None)
        })
        .collect()
}

fn read_predict_input(p: &Pipeline, path: &Path, l1s: &[L1]) -> Result<Vec<KvlItem>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut items = Vec::new();
    for &l1 in l1s {
        match parse_kvl_reader(text.as_bytes(), path, l1, Split::Test, &p.mapping) {
            Ok((split, diags)) => {
                for d in diags {
                    log::warn!("{}:{}: {}", path.display(), d.line, d.message);
                }
                items.extend(split.items);
            }
            Err(CorpusError::MissingColumn { .. }) => items.extend(parse_wordlist(&text, l1)),
            Err(e) => return Err(e.into()),
        }
    }
    if items.is_empty() {
        return Err(CliError::Usage(format!("{}: no items to score", path.display())));
    }
    Ok(items)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let mut cfg = load_config(g)?;
    match &cli.command {
        Command::Train(t) => {
            if let Some(v) = t.iterations {
                cfg.gbdt.n_iterations = v;
            }
            if let Some(v) = t.depth {
                cfg.gbdt.tree_depth = v;
            }
            if let Some(v) = t.learning_rate {
                cfg.gbdt.learning_rate = v;
            }
            if let Some(v) = t.l2_leaf_reg {
                cfg.gbdt.l2_leaf_reg = v;
            }
        }
        Command::Analyze(a) => {
            if a.no_svg {
                cfg.analysis.svg = false;
            }
            if let Some(v) = a.bootstrap_resamples {
                cfg.analysis.bootstrap_resamples = v;
            }
        }
        Command::Serve(s) => {
            if let Some(v) = &s.bind {
                cfg.service.bind = v.clone();
            }
            if let Some(v) = &s.inflections {
                cfg.service.inflections = Some(v.clone());
            }
            if !s.cors_origins.is_empty() {
                cfg.service.cors_origins = s.cors_origins.clone();
            }
            if let Some(v) = s.max_text_bytes {
                cfg.service.max_text_bytes = v;
            }
            if let Some(v) = s.top_k {
                cfg.service.top_k = v;
            }
            if !g.seeds.is_empty() {
                cfg.service.seeds = g.seeds.clone();
            }
        }
        _ => {}
    }

    if let Command::Serve(_) = cli.command {
        let bind = cfg.service.bind.clone();
        let state = AppState::load(cfg)?;
        let rt = tokio::runtime::Runtime::new().map_err(CliError::Runtime)?;
        return Ok(rt.block_on(lexdiff_service::serve(state, &bind))?);
    }

    let p = Pipeline::open(cfg)?;
    if let Command::Predict { input } = &cli.command {
        let l1s = if g.l1.is_empty() { trained_selection(&p, g)?.0 } else { p.l1s() };
        let items = read_predict_input(&p, input, &l1s)?;
        let seeds = (!g.seeds.is_empty()).then_some(g.seeds.as_slice());
        let preds = p.predict(&items, seeds)?;
        let mut out = std::io::stdout().lock();
        serde_json::to_writer_pretty(&mut out, &json!({ "predictions": preds }))
            .map_err(|e| CliError::Stdout(e.into()))?;
        writeln!(out).map_err(CliError::Stdout)?;
        return Ok(());
    }

    let _lock = OutputLock::acquire(&p.layout)?;
    write_run_config(&p)?;
    match &cli.command {
        Command::Extract { split } => {
            let l1s = p.l1s();
            let splits: Vec<Split> = if split.is_empty() {
                Split::ALL.into_iter().filter(|s| l1s.iter().any(|l| p.has_split(*l, *s))).collect()
            } else {
                split.clone()
            };
            for path in p.extract(&l1s, &splits)? {
                log::info!("wrote {}", path.display());
            }
        }
        Command::Train(_) => {
            for path in p.train(&p.l1s(), None)? {
                log::info!("wrote {}", path.display());
            }
        }
        Command::Evaluate => {
            let (l1s, seeds) = trained_selection(&p, g)?;
            let summary = p.evaluate(&l1s, Some(&seeds))?;
            for r in summary.gbdt.iter().filter(|r| r.l1_train == r.l1_test) {
                log::info!("gbdt {}: rmse {:.3} over {} seeds", r.l1_train, r.rmse_median, r.seeds.len());
            }
            log::info!("wrote {}", p.layout.eval_dir().display());
        }
        Command::Explain => {
            let (l1s, seeds) = trained_selection(&p, g)?;
            p.explain(&l1s, Some(&seeds))?;
            log::info!("wrote {}", p.layout.mean_abs_shap().display());
        }
        Command::Analyze(_) => {
            let (l1s, seeds) = trained_selection(&p, g)?;
            for path in p.analyze(&l1s, Some(&seeds))? {
                log::info!("wrote {}", path.display());
            }
        }
        Command::Predict { .. } | Command::Serve(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report(&CliError::Usage(e.render().to_string().trim().to_string()));
        }
    };
    init_logging(&cli.global);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
