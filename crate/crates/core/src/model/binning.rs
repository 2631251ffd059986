//! Quantile histogram bins. Cut points are midpoints between adjacent
//! distinct training values, chosen from row-quantile positions, so the
//! induced partition depends on ranks only.

use rand::Rng;

/// Cut points for one feature: at most `max_bins - 1` strictly increasing
/// thresholds. Each quantile position is shifted by a uniform draw from
/// `rng` of up to half a row.
pub fn fit_cuts<R: Rng>(values: &[f64], max_bins: usize, rng: &mut R) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let mut uniques: Vec<f64> = Vec::new();
    let mut starts: Vec<usize> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if uniques.last() != Some(&v) {
            uniques.push(v);
            starts.push(i);
        }
    }
    let n = sorted.len();
    let mut idx: Vec<usize> = if uniques.len() <= max_bins {
        (1..uniques.len()).collect()
    } else {
        let mut out = Vec::with_capacity(max_bins);
        for k in 1..max_bins {
            let jitter: f64 = rng.random_range(-0.5..0.5);
            let pos = k as f64 * n as f64 / max_bins as f64 + jitter;
            let p = (pos.floor().max(0.0) as usize).min(n - 1);
            let j = starts.partition_point(|&s| s <= p) - 1;
            if j >= 1 {
                out.push(j);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    };
    idx.retain(|&j| j < uniques.len());
    idx.into_iter()
        .map(|j| {
            let (lo, hi) = (uniques[j - 1], uniques[j]);
            let mid = lo + (hi - lo) / 2.0;
            if mid >= hi {
                lo
            } else {
                mid
            }
        })
        .collect()
}

/// Bin index: the number of cuts strictly below `v`, so `v <= cuts[k]`
/// exactly when `bin(v) <= k`.
pub fn bin_of(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c < v)
}
