//! Path-dependent TreeSHAP and feature-group importance shares.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{Feature, FeatureGroup, FeatureRow, N_FEATURES};
use crate::model::{next_child_index, ModelError, Tree, TreeEnsemble};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub item_id: String,
    pub base_value: f64,
    pub prediction: f64,
    pub phi: Vec<f64>,
    pub group_shares: [f64; 4],
    /// All Shapley values were zero and the shares fell back to uniform.
    pub degenerate: bool,
}

impl Attribution {
    pub fn phi_of(&self, f: Feature) -> f64 {
        self.phi[f.index()]
    }

    pub fn share(&self, g: FeatureGroup) -> f64 {
        self.group_shares[g.index()]
    }
}

#[derive(Clone, Copy, Debug)]
struct PathElem {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend(path: &mut [PathElem], ud: usize, zero: f64, one: f64, feature: Option<usize>) {
    path[ud] = PathElem {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        pweight: if ud == 0 { 1.0 } else { 0.0 },
    };
    for i in (0..ud).rev() {
        path[i + 1].pweight += one * path[i].pweight * (i + 1) as f64 / (ud + 1) as f64;
        path[i].pweight = zero * path[i].pweight * (ud - i) as f64 / (ud + 1) as f64;
    }
}

fn unwind(path: &mut [PathElem], ud: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one = path[ud].pweight;
    for i in (0..ud).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * (ud + 1) as f64 / ((i + 1) as f64 * one);
            next_one = tmp - path[i].pweight * zero * (ud - i) as f64 / (ud + 1) as f64;
        } else {
            path[i].pweight = path[i].pweight * (ud + 1) as f64 / (zero * (ud - i) as f64);
        }
    }
    for i in index..ud {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

fn unwound_sum(path: &[PathElem], ud: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one = path[ud].pweight;
    let mut total = 0.0;
    for i in (0..ud).rev() {
        if one != 0.0 {
            let tmp = next_one * (ud + 1) as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].pweight - tmp * zero * (ud - i) as f64 / (ud + 1) as f64;
        } else {
            total += path[i].pweight / zero / ((ud - i) as f64 / (ud + 1) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    parent: &[PathElem],
    ud: usize,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    let mut path = parent[..ud].to_vec();
    path.resize(
        ud + 1,
        PathElem {
            feature: None,
            zero_fraction: 0.0,
            one_fraction: 0.0,
            pweight: 0.0,
        },
    );
    extend(&mut path, ud, zero, one, feature);
    let n = &tree.nodes[node];
    match &n.split {
        None => {
            for i in 1..=ud {
                let w = unwound_sum(&path, ud, i);
                let e = path[i];
                phi[e.feature.unwrap()] += w * (e.one_fraction - e.zero_fraction) * n.value;
            }
        }
        Some(s) => {
            let hot = next_child_index(s, x[s.feature]);
            let cold = if hot == s.left { s.right } else { s.left };
            let (mut iz, mut io) = (1.0, 1.0);
            let mut ud = ud;
            if let Some(k) = (1..=ud).find(|&k| path[k].feature == Some(s.feature)) {
                iz = path[k].zero_fraction;
                io = path[k].one_fraction;
                unwind(&mut path, ud, k);
                ud -= 1;
            }
            let cover = n.cover;
            recurse(
                tree,
                x,
                phi,
                hot,
                &path,
                ud + 1,
                iz * tree.nodes[hot].cover / cover,
                io,
                Some(s.feature),
            );
            recurse(
                tree,
                x,
                phi,
                cold,
                &path,
                ud + 1,
                iz * tree.nodes[cold].cover / cover,
                0.0,
                Some(s.feature),
            );
        }
    }
}

/// Shapley values of one tree's raw output at `x`, added into `phi`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    if tree.nodes[0].split.is_none() {
        return;
    }
    recurse(tree, x, phi, 0, &[], 0, 1.0, 1.0, None);
}

/// Ensemble attribution on a dense vector: `(base_value, phi)` with phi
/// scaled by the learning rate.
pub fn shap_dense(trees: &[Tree], learning_rate: f64, base_score: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let mut phi = vec![0.0; x.len()];
    let mut base = base_score;
    let mut tmp = vec![0.0; x.len()];
    for t in trees {
        tmp.iter_mut().for_each(|v| *v = 0.0);
        tree_shap_single(t, x, &mut tmp);
        for (p, v) in phi.iter_mut().zip(&tmp) {
            *p += learning_rate * v;
        }
        base += learning_rate * t.expected_value();
    }
    (base, phi)
}

/// `share_g = Σ_{f∈g} |phi_f| / Σ_f |phi_f|`; uniform and flagged when all
/// values are zero.
pub fn group_importance(phi: &[f64]) -> ([f64; 4], bool) {
    let mut sums = [0.0; 4];
    for f in Feature::ALL {
        sums[f.group().index()] += phi[f.index()].abs();
    }
    let total: f64 = sums.iter().sum();
    if total == 0.0 {
        return ([0.25; 4], true);
    }
    (sums.map(|s| s / total), false)
}

pub fn tree_shap(model: &TreeEnsemble, row: &FeatureRow) -> Result<Attribution, ModelError> {
    model.check_schema()?;
    Ok(attribute_unchecked(model, row))
}

fn attribute_unchecked(model: &TreeEnsemble, row: &FeatureRow) -> Attribution {
    let x = model.transform(row);
    let (base_value, phi) = shap_dense(&model.trees, model.learning_rate, model.base_score, &x);
    let (group_shares, degenerate) = group_importance(&phi);
    Attribution {
        item_id: row.item_id.clone(),
        base_value,
        prediction: model.predict_dense(&x),
        phi,
        group_shares,
        degenerate,
    }
}

pub fn attribute_all(model: &TreeEnsemble, rows: &[FeatureRow]) -> Result<Vec<Attribution>, ModelError> {
    model.check_schema()?;
    Ok(rows.par_iter().map(|r| attribute_unchecked(model, r)).collect())
}

/// Mean |phi| per feature over items.
pub fn mean_abs_shap(attrs: &[Attribution]) -> [f64; N_FEATURES] {
    let mut out = [0.0; N_FEATURES];
    if attrs.is_empty() {
        return out;
    }
    for a in attrs {
        for (o, p) in out.iter_mut().zip(&a.phi) {
            *o += p.abs();
        }
    }
    out.map(|v| v / attrs.len() as f64)
}

/// Per-feature mean |phi| over items, then the median across seeds.
pub fn mean_abs_shap_table(per_seed: &[Vec<Attribution>]) -> [f64; N_FEATURES] {
    let tables: Vec<[f64; N_FEATURES]> = per_seed.iter().map(|a| mean_abs_shap(a)).collect();
    let mut out = [0.0; N_FEATURES];
    for (f, o) in out.iter_mut().enumerate() {
        let col: Vec<f64> = tables.iter().map(|t| t[f]).collect();
        *o = median(&col).unwrap_or(0.0);
    }
    out
}

pub fn attributions_csv_header() -> Vec<String> {
    let mut h = vec!["item_id".to_string(), "base_value".to_string()];
    h.extend(Feature::ALL.iter().map(|f| format!("phi_{}", f.name())));
    h.extend(FeatureGroup::ALL.iter().map(|g| format!("share_{}", g.name())));
    h.push("degenerate".into());
    h
}

pub fn write_attributions_csv<W: Write>(attrs: &[Attribution], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(attributions_csv_header())?;
    for a in attrs {
        let mut rec = vec![a.item_id.clone(), a.base_value.to_string()];
        rec.extend(a.phi.iter().map(|v| v.to_string()));
        rec.extend(a.group_shares.iter().map(|v| v.to_string()));
        rec.push(u8::from(a.degenerate).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_attributions_csv<R: std::io::Read>(input: R) -> Result<Vec<Attribution>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(attributions_csv_header().iter().map(String::as_str)) {
        return Err("unexpected attributions.csv header".into());
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let phi = (0..N_FEATURES).map(|k| num(&rec[2 + k])).collect::<Result<Vec<_>, _>>()?;
        let mut shares = [0.0; 4];
        for (k, s) in shares.iter_mut().enumerate() {
            *s = num(&rec[2 + N_FEATURES + k])?;
        }
        let base_value = num(&rec[1])?;
        out.push(Attribution {
            item_id: rec[0].to_string(),
            base_value,
            prediction: base_value + phi.iter().sum::<f64>(),
            phi,
            group_shares: shares,
            degenerate: &rec[2 + N_FEATURES + 4] == "1",
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_examples() {
        let mut phi = vec![0.0; N_FEATURES];
        phi[Feature::LogFrequency.index()] = 2.0;
        phi[Feature::SenseCount.index()] = -1.0;
        phi[Feature::TargetWordLength.index()] = 1.0;
        let (s, d) = group_importance(&phi);
        assert_eq!(s, [0.5, 0.25, 0.25, 0.0]);
        assert!(!d);
        let (s, d) = group_importance(&[0.0; N_FEATURES]);
        assert_eq!(s, [0.25; 4]);
        assert!(d);
    }
}
