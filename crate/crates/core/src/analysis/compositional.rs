//! Aitchison geometry for three-part compositions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::stats::percentile;

pub fn closure(x: &[f64]) -> Vec<f64> {
    let s: f64 = x.iter().sum();
    x.iter().map(|v| v / s).collect()
}

/// Multiplicative replacement: zeros become `delta`, the non-zero parts
/// shrink by `1 - k·delta` so the composition still sums to one.
pub fn replace_zeros(x: &[f64], delta: f64) -> Vec<f64> {
    let c = closure(x);
    let k = c.iter().filter(|&&v| v <= 0.0).count() as f64;
    c.iter()
        .map(|&v| if v <= 0.0 { delta } else { v * (1.0 - k * delta) })
        .collect()
}

pub fn clr(x: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let g = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - g).collect()
}

/// Trace of the sample covariance (n − 1) of the clr coordinates.
pub fn total_variance(comps: &[Vec<f64>], delta: f64) -> f64 {
    let n = comps.len();
    if n < 2 {
        return 0.0;
    }
    let z: Vec<Vec<f64>> = comps.iter().map(|c| clr(&replace_zeros(c, delta))).collect();
    let d = z[0].len();
    (0..d)
        .map(|j| {
            let m = z.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            z.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1) as f64
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalVariance {
    pub totvar: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub resamples: usize,
    pub delta: f64,
}

impl TotalVariance {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Total variance with a percentile bootstrap 90% interval.
pub fn aitchison_total_variance(
    comps: &[Vec<f64>],
    delta: f64,
    resamples: usize,
    seed: u64,
) -> Result<TotalVariance, AnalysisError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AnalysisError::Invalid("zero-replacement delta must be in (0, 1)".into()));
    }
    if comps.len() < 2 {
        return Err(AnalysisError::TooFewPoints(comps.len()));
    }
    if comps.iter().any(|c| c.iter().any(|v| !(*v >= 0.0)) || c.iter().sum::<f64>() <= 0.0) {
        return Err(AnalysisError::Invalid("compositions must be non-negative with a positive sum".into()));
    }
    let totvar = total_variance(comps, delta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = comps.len();
    let mut stats = Vec::with_capacity(resamples);
    let mut sample = Vec::with_capacity(n);
    for _ in 0..resamples {
        sample.clear();
        for _ in 0..n {
            sample.push(comps[rng.random_range(0..n)].clone());
        }
        stats.push(total_variance(&sample, delta));
    }
    let (ci_low, ci_high) = if stats.is_empty() {
        (totvar, totvar)
    } else {
        (percentile(&stats, 5.0).unwrap(), percentile(&stats, 95.0).unwrap())
    };
    Ok(TotalVariance {
        totvar,
        ci_low,
        ci_high,
        n,
        resamples,
        delta,
    })
}
