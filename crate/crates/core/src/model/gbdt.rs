//! Level-wise histogram boosting for squared loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::binning::{bin_of, fit_cuts};
use super::{
    feature_schema_hash, GbdtConfig, ModelError, Node, Preprocessor, Result, SplitRule, TrainingSummary, Tree,
    TreeEnsemble, MODEL_FORMAT_VERSION,
};
use crate::features::{Feature, FeatureRow};
use crate::stats::rmse;

/// Result of boosting on a dense column-major matrix.
#[derive(Debug, Clone)]
pub struct DenseFit {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub train_pred: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    bin: usize,
    g_left: f64,
    n_left: usize,
}

fn score(g: f64, n: usize, lambda: f64) -> f64 {
    g * g / (n as f64 + lambda)
}

/// Best split of one feature's histogram for one node.
fn best_in_histogram(hist: &[(f64, u32)], g_total: f64, n_total: usize, cfg: &GbdtConfig) -> Option<Candidate> {
    let parent = score(g_total, n_total, cfg.l2_leaf_reg);
    let mut best: Option<Candidate> = None;
    let (mut g_left, mut n_left) = (0.0, 0usize);
    for (bin, &(g, n)) in hist.iter().enumerate().take(hist.len().saturating_sub(1)) {
        g_left += g;
        n_left += n as usize;
        let n_right = n_total - n_left;
        if n_left < cfg.min_samples_leaf || n_right < cfg.min_samples_leaf {
            continue;
        }
        let gain = score(g_left, n_left, cfg.l2_leaf_reg) + score(g_total - g_left, n_right, cfg.l2_leaf_reg)
            - parent;
        if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
            best = Some(Candidate {
                gain,
                bin,
                g_left,
                n_left,
            });
        }
    }
    best
}

/// Boost `cfg.n_iterations` trees on `columns` (one vector per feature).
pub fn fit_dense(columns: &[Vec<f64>], y: &[f64], cfg: &GbdtConfig) -> Result<DenseFit> {
    cfg.validate()?;
    let n = y.len();
    if n < 2 {
        return Err(ModelError::TooFewRows(n));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteTarget(i));
    }
    for c in columns {
        if c.len() != n {
            return Err(ModelError::LengthMismatch {
                rows: c.len(),
                targets: n,
            });
        }
    }
    let base_score = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base_score; n];
    let constant = y.iter().all(|&v| v == y[0]);
    if constant {
        log::warn!("constant target; the ensemble consists of the base score only");
        return Ok(DenseFit {
            base_score,
            trees: Vec::new(),
            train_pred: pred,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cuts: Vec<Vec<f64>> = columns.iter().map(|c| fit_cuts(c, cfg.max_bins, &mut rng)).collect();
    let bins: Vec<Vec<u8>> = columns
        .iter()
        .zip(&cuts)
        .map(|(c, cu)| c.iter().map(|&v| bin_of(cu, v) as u8).collect())
        .collect();
    let n_bins: Vec<usize> = cuts.iter().map(|c| c.len() + 1).collect();
    let mut order: Vec<usize> = (0..columns.len()).collect();

    let mut trees = Vec::with_capacity(cfg.n_iterations);
    let mut residual = vec![0.0; n];
    let mut assign = vec![0u32; n];
    for _ in 0..cfg.n_iterations {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        order.shuffle(&mut rng);
        let tree = build_tree(&bins, &n_bins, &cuts, &residual, &order, cfg, &mut assign);
        for i in 0..n {
            pred[i] += cfg.learning_rate * tree.nodes[assign[i] as usize].value;
        }
        trees.push(tree);
    }
    Ok(DenseFit {
        base_score,
        trees,
        train_pred: pred,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_tree(
    bins: &[Vec<u8>],
    n_bins: &[usize],
    cuts: &[Vec<f64>],
    residual: &[f64],
    order: &[usize],
    cfg: &GbdtConfig,
    assign: &mut [u32],
) -> Tree {
    let n = residual.len();
    let lambda = cfg.l2_leaf_reg;
    assign.iter_mut().for_each(|a| *a = 0);
    let g_root: f64 = residual.iter().sum();
    // (sum of residuals, count) per node
    let mut stats: Vec<(f64, usize)> = vec![(g_root, n)];
    let mut nodes = vec![Node {
        value: g_root / (n as f64 + lambda),
        cover: n as f64,
        split: None,
    }];
    let mut frontier: Vec<usize> = vec![0];

    for _depth in 0..cfg.tree_depth {
        frontier.retain(|&i| stats[i].1 >= 2 * cfg.min_samples_leaf);
        if frontier.is_empty() {
            break;
        }
        let mut slot_of = vec![u32::MAX; nodes.len()];
        for (s, &i) in frontier.iter().enumerate() {
            slot_of[i] = s as u32;
        }
        let n_slots = frontier.len();
        let per_feature: Vec<Vec<Option<Candidate>>> = (0..bins.len())
            .into_par_iter()
            .map(|f| {
                let nb = n_bins[f];
                if nb < 2 {
                    return vec![None; n_slots];
                }
                let mut hist = vec![(0.0f64, 0u32); n_slots * nb];
                for r in 0..n {
                    let s = slot_of[assign[r] as usize];
                    if s != u32::MAX {
                        let h = &mut hist[s as usize * nb + bins[f][r] as usize];
                        h.0 += residual[r];
                        h.1 += 1;
                    }
                }
                frontier
                    .iter()
                    .enumerate()
                    .map(|(s, &i)| best_in_histogram(&hist[s * nb..(s + 1) * nb], stats[i].0, stats[i].1, cfg))
                    .collect()
            })
            .collect();

        let mut next = Vec::new();
        let mut split_at: Vec<Option<(usize, usize)>> = vec![None; nodes.len()];
        for (s, &i) in frontier.iter().enumerate() {
            let mut best: Option<(usize, Candidate)> = None;
            for &f in order {
                if let Some(c) = per_feature[f][s] {
                    if best.is_none_or(|(_, b)| c.gain > b.gain) {
                        best = Some((f, c));
                    }
                }
            }
            let Some((f, c)) = best else { continue };
            let (g, cnt) = stats[i];
            let (gl, nl) = (c.g_left, c.n_left);
            let (gr, nr) = (g - gl, cnt - nl);
            let left = nodes.len();
            for (gs, ns) in [(gl, nl), (gr, nr)] {
                nodes.push(Node {
                    value: gs / (ns as f64 + lambda),
                    cover: ns as f64,
                    split: None,
                });
                stats.push((gs, ns));
            }
            nodes[i].split = Some(SplitRule {
                feature: f,
                threshold: cuts[f][c.bin],
                left,
                right: left + 1,
                default_left: nl >= nr,
                gain: c.gain,
            });
            split_at.push(None);
            split_at.push(None);
            split_at[i] = Some((f, c.bin));
            next.push(left);
            next.push(left + 1);
        }
        if next.is_empty() {
            break;
        }
        for r in 0..n {
            let a = assign[r] as usize;
            if let Some((f, bin)) = split_at[a] {
                let s = nodes[a].split.as_ref().unwrap();
                assign[r] = if bins[f][r] as usize <= bin { s.left } else { s.right } as u32;
            }
        }
        frontier = next;
    }
    Tree { nodes }
}

/// Train an ensemble on feature rows. A constant target yields an ensemble
/// without trees that predicts the target everywhere.
pub fn train_gbdt(rows: &[FeatureRow], targets: &[f64], cfg: &GbdtConfig) -> Result<TreeEnsemble> {
    cfg.validate()?;
    if rows.len() != targets.len() {
        return Err(ModelError::LengthMismatch {
            rows: rows.len(),
            targets: targets.len(),
        });
    }
    if rows.len() < 2 {
        return Err(ModelError::TooFewRows(rows.len()));
    }
    if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteTarget(i));
    }
    let pre = Preprocessor::fit(rows, targets, cfg.cat_smoothing);
    let dense: Vec<_> = rows.iter().map(|r| pre.transform(r)).collect();
    let columns: Vec<Vec<f64>> = (0..Feature::ALL.len())
        .map(|f| dense.iter().map(|x| x[f]).collect())
        .collect();
    let fit = fit_dense(&columns, targets, cfg)?;
    let summary = TrainingSummary {
        n_rows: rows.len(),
        target_min: targets.iter().copied().fold(f64::INFINITY, f64::min),
        target_max: targets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        train_rmse: rmse(&fit.train_pred, targets).unwrap_or(0.0),
    };
    Ok(TreeEnsemble {
        format_version: MODEL_FORMAT_VERSION,
        feature_schema_hash: feature_schema_hash(),
        feature_names: Feature::ALL.iter().map(|f| f.name().to_string()).collect(),
        l1: None,
        config: cfg.clone(),
        base_score: fit.base_score,
        learning_rate: cfg.learning_rate,
        preprocessor: pre,
        vectorizer: None,
        summary,
        trees: fit.trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(iter: usize) -> GbdtConfig {
        GbdtConfig {
            n_iterations: iter,
            min_samples_leaf: 1,
            ..Default::default()
        }
    }

    #[test]
    fn constant_target_gives_no_trees() {
        let cols = vec![vec![1.0, 2.0, 3.0]];
        let fit = fit_dense(&cols, &[1.7, 1.7, 1.7], &small_cfg(10)).unwrap();
        assert!(fit.trees.is_empty());
        assert_eq!(fit.train_pred, vec![1.7; 3]);
    }

    #[test]
    fn separable_feature_drives_error_down() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v / 4.0).floor()).collect();
        let short = fit_dense(&[x.clone()], &y, &small_cfg(50)).unwrap();
        let long = fit_dense(&[x], &y, &small_cfg(1500)).unwrap();
        let e1 = rmse(&short.train_pred, &y).unwrap();
        let e2 = rmse(&long.train_pred, &y).unwrap();
        assert!(e2 < e1 && e2 < 0.05, "{e1} {e2}");
    }

    #[test]
    fn train_pred_matches_traversal() {
        let x0: Vec<f64> = (0..60).map(|i| ((i * 37) % 60) as f64).collect();
        let x1: Vec<f64> = (0..60).map(|i| ((i * 11) % 7) as f64).collect();
        let y: Vec<f64> = (0..60).map(|i| x0[i] * 0.1 - x1[i]).collect();
        let cfg = small_cfg(30);
        let fit = fit_dense(&[x0.clone(), x1.clone()], &y, &cfg).unwrap();
        for i in 0..60 {
            let mut p = fit.base_score;
            for t in &fit.trees {
                p += cfg.learning_rate * t.predict(&[x0[i], x1[i]]);
            }
            assert_eq!(p, fit.train_pred[i]);
        }
        assert!(fit.trees.iter().all(|t| t.depth() <= cfg.tree_depth));
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            fit_dense(&[vec![1.0]], &[1.0], &small_cfg(1)),
            Err(ModelError::TooFewRows(1))
        ));
    }
}
