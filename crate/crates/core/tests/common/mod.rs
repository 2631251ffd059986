//! Independent reference implementations used as oracles by the
//! integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use lexdiff_core::model::{Node, SplitRule, Tree};
use lexdiff_core::analysis::SimplexPoint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random tree with consistent covers over `n_features` features.
pub fn random_tree<R: Rng>(rng: &mut R, n_features: usize, max_depth: usize) -> Tree {
    let mut nodes = Vec::new();
    let cover = rng.random_range(20..200) as f64;
    grow(rng, &mut nodes, n_features, max_depth, 0, cover);
    Tree { nodes }
}

fn grow<R: Rng>(rng: &mut R, nodes: &mut Vec<Node>, nf: usize, max_depth: usize, depth: usize, cover: f64) -> usize {
    let id = nodes.len();
    nodes.push(Node {
        value: rng.random_range(-2.0..2.0),
        cover,
        split: None,
    });
    let can_split = depth < max_depth && cover >= 2.0;
    if can_split && (depth == 0 || rng.random_bool(0.75)) {
        let left_cover = rng.random_range(1..cover as usize) as f64;
        let feature = rng.random_range(0..nf);
        let threshold = rng.random_range(-1.0..1.0);
        let left = grow(rng, nodes, nf, max_depth, depth + 1, left_cover);
        let right = grow(rng, nodes, nf, max_depth, depth + 1, cover - left_cover);
        nodes[id].split = Some(SplitRule {
            feature,
            threshold,
            left,
            right,
            default_left: left_cover >= cover - left_cover,
            gain: 1.0,
        });
    }
    id
}

fn child(s: &SplitRule, v: f64) -> usize {
    if v.is_nan() {
        if s.default_left {
            s.left
        } else {
            s.right
        }
    } else if v <= s.threshold {
        s.left
    } else {
        s.right
    }
}

/// Path-dependent conditional expectation of a tree given the features in
/// `known` (bitmask).
pub fn cond_expectation(tree: &Tree, node: usize, x: &[f64], known: u32) -> f64 {
    let n = &tree.nodes[node];
    match &n.split {
        None => n.value,
        Some(s) if known & (1 << s.feature) != 0 => cond_expectation(tree, child(s, x[s.feature]), x, known),
        Some(s) => {
            let (l, r) = (&tree.nodes[s.left], &tree.nodes[s.right]);
            (l.cover * cond_expectation(tree, s.left, x, known) + r.cover * cond_expectation(tree, s.right, x, known))
                / n.cover
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Exhaustive Shapley values over all 2^M coalitions.
pub fn brute_force_shap(tree: &Tree, x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        for s in 0u32..(1 << m) {
            if s & (1 << i) != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = factorial(size) * factorial(m - size - 1) / factorial(m);
            *p += w * (cond_expectation(tree, 0, x, s | (1 << i)) - cond_expectation(tree, 0, x, s));
        }
    }
    phi
}

fn ngrams(word: &str) -> BTreeMap<String, usize> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = BTreeMap::new();
    for n in 2..=4 {
        if chars.len() >= n {
            for i in 0..=chars.len() - n {
                *out.entry(chars[i..i + n].iter().collect::<String>()).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Dense tf-idf cosine over the full vocabulary of `corpus` (already
/// normalized, lowercased strings).
pub fn brute_force_cosine(corpus: &[String], a: &str, b: &str) -> f64 {
    let docs: BTreeSet<&String> = corpus.iter().filter(|s| !s.is_empty()).collect();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for d in &docs {
        for g in ngrams(d).keys() {
            *df.entry(g.clone()).or_insert(0) += 1;
        }
    }
    let n = docs.len() as f64;
    let vec = |w: &str| -> Vec<f64> {
        let tf = ngrams(w);
        df.iter()
            .map(|(g, &d)| match tf.get(g) {
                Some(&t) => (1.0 + (t as f64).ln()) * (n / d as f64).ln(),
                None => 0.0,
            })
            .collect()
    };
    let (va, vb) = (vec(a), vec(b));
    let dot: f64 = va.iter().zip(&vb).map(|(p, q)| p * q).sum();
    let na: f64 = va.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn ref_rmse(p: &[f64], g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - g[i]) * (p[i] - g[i]);
    }
    (s / p.len() as f64).sqrt()
}

/// Pearson from population moments.
pub fn ref_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

/// Quadratic-time average ranks.
pub fn ref_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn ref_spearman(x: &[f64], y: &[f64]) -> f64 {
    ref_pearson(&ref_ranks(x), &ref_ranks(y))
}

/// Direct O(n²) leave-one-out error, written without shared helpers.
pub fn brute_loo(xy: &[(f64, f64)], y: &[f64], h: f64) -> f64 {
    let n = xy.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d2 = (xy[i].0 - xy[j].0).powi(2) + (xy[i].1 - xy[j].1).powi(2);
            let k = (-0.5 * d2 / (h * h)).exp();
            num += k * y[j];
            den += k;
        }
        if den == 0.0 {
            return f64::INFINITY;
        }
        total += (y[i] - num / den).powi(2);
    }
    total / n as f64
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<SimplexPoint> {
    (0..n)
        .map(|i| {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let (meaning, form) = (a, b);
            let (x, y) = lexdiff_core::analysis::cartesian(meaning, form);
            SimplexPoint {
                item_id: format!("p{i}"),
                familiarity: 1.0 - a - b,
                meaning,
                form,
                x,
                y,
                gold: Some(2.0 * x - y + rng.random_range(-0.3..0.3)),
            }
        })
        .collect()
}
