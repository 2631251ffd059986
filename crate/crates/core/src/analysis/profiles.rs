//! Per-item group-share profiles sorted by familiarity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::explain::Attribution;
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileItem {
    pub item_id: String,
    pub rank: usize,
    /// Per-item median share across seeds, re-closed to sum to one.
    pub shares: [f64; 4],
    pub rolling: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub window: usize,
    pub items: Vec<ProfileItem>,
    /// Per-group mean share over items, median across seeds.
    pub group_means: [f64; 4],
    pub excluded_degenerate: usize,
}

/// Centred rolling mean: position `i` averages `[i - w/2, i + (w - 1) - w/2]`,
/// clipped at the ends.
pub fn rolling_mean(values: &[[f64; 4]], window: usize) -> Vec<[f64; 4]> {
    let n = values.len();
    let back = window / 2;
    let fwd = window.saturating_sub(1) - back;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(n - 1);
            let mut acc = [0.0; 4];
            for v in &values[lo..=hi] {
                for g in 0..4 {
                    acc[g] += v[g];
                }
            }
            acc.map(|a| a / (hi - lo + 1) as f64)
        })
        .collect()
}

/// Build the profile from per-seed attributions of the same split.
/// Degenerate attributions are left out.
pub fn importance_profiles(per_seed: &[Vec<Attribution>], window: usize) -> GroupProfile {
    let mut by_item: BTreeMap<&str, Vec<[f64; 4]>> = BTreeMap::new();
    let mut excluded = 0;
    for seed in per_seed {
        for a in seed {
            if a.degenerate {
                excluded += 1;
                continue;
            }
            by_item.entry(a.item_id.as_str()).or_default().push(a.group_shares);
        }
    }
    let mut items: Vec<ProfileItem> = by_item
        .into_iter()
        .map(|(id, shares)| {
            let mut m = [0.0; 4];
            for (g, slot) in m.iter_mut().enumerate() {
                let col: Vec<f64> = shares.iter().map(|s| s[g]).collect();
                *slot = median(&col).unwrap_or(0.0);
            }
            let total: f64 = m.iter().sum();
            if total > 0.0 {
                m = m.map(|v| v / total);
            }
            ProfileItem {
                item_id: id.to_string(),
                rank: 0,
                shares: m,
                rolling: [0.0; 4],
            }
        })
        .collect();
    items.sort_by(|a, b| b.shares[0].total_cmp(&a.shares[0]).then_with(|| a.item_id.cmp(&b.item_id)));
    let shares: Vec<[f64; 4]> = items.iter().map(|i| i.shares).collect();
    for (k, (it, r)) in items.iter_mut().zip(rolling_mean(&shares, window.max(1))).enumerate() {
        it.rank = k + 1;
        it.rolling = r;
    }

    let seed_means: Vec<[f64; 4]> = per_seed
        .iter()
        .filter_map(|seed| {
            let live: Vec<&Attribution> = seed.iter().filter(|a| !a.degenerate).collect();
            if live.is_empty() {
                return None;
            }
            let mut acc = [0.0; 4];
            for a in &live {
                for g in 0..4 {
                    acc[g] += a.group_shares[g];
                }
            }
            Some(acc.map(|v| v / live.len() as f64))
        })
        .collect();
    let mut group_means = [0.0; 4];
    for (g, slot) in group_means.iter_mut().enumerate() {
        let col: Vec<f64> = seed_means.iter().map(|m| m[g]).collect();
        *slot = median(&col).unwrap_or(0.0);
    }
    GroupProfile {
        window,
        items,
        group_means,
        excluded_degenerate: excluded,
    }
}
