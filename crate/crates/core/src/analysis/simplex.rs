//! Barycentric projection of group shares and the Nadaraya–Watson
//! difficulty surface over the triangle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::explain::Attribution;

pub const TRIANGLE_HEIGHT: f64 = 0.866_025_403_784_438_6;

/// Corners: familiarity (0, 0), form (1, 0), meaning (1/2, √3/2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub item_id: String,
    pub familiarity: f64,
    pub meaning: f64,
    pub form: f64,
    pub x: f64,
    pub y: f64,
    pub gold: Option<f64>,
}

pub fn cartesian(meaning: f64, form: f64) -> (f64, f64) {
    (form + meaning / 2.0, meaning * TRIANGLE_HEIGHT)
}

/// `form = surface + transfer`.
pub fn to_simplex(attr: &Attribution, gold: Option<f64>) -> SimplexPoint {
    let [fam, meaning, surface, transfer] = attr.group_shares;
    let form = surface + transfer;
    let (x, y) = cartesian(meaning, form);
    SimplexPoint {
        item_id: attr.item_id.clone(),
        familiarity: fam,
        meaning,
        form,
        x,
        y,
        gold,
    }
}

/// 20 log-spaced bandwidths between 0.02 and 1 (triangle side = 1).
pub fn default_bandwidth_grid() -> Vec<f64> {
    log_space(0.02, 1.0, 20)
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwConfig {
    pub bandwidths: Vec<f64>,
    /// Minimum total kernel weight for a cell to be shown.
    pub w_min: f64,
    /// Number of grid columns along the base; rows follow the height.
    pub resolution: usize,
}

impl Default for NwConfig {
    fn default() -> Self {
        NwConfig {
            bandwidths: default_bandwidth_grid(),
            w_min: 5.0,
            resolution: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    /// `None` for masked cells.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSurface {
    pub bandwidth: f64,
    pub w_min: f64,
    /// Mean leave-one-out squared error per candidate bandwidth.
    pub loo_scores: Vec<(f64, f64)>,
    pub cells: Vec<SurfaceCell>,
}

fn kernel(d2: f64, h: f64) -> f64 {
    (-d2 / (2.0 * h * h)).exp()
}

/// Mean leave-one-out squared error for each bandwidth; `+∞` when some
/// point has no kernel weight from the others.
pub fn loo_scores(xy: &[(f64, f64)], y: &[f64], bandwidths: &[f64]) -> Vec<f64> {
    let n = xy.len();
    let d2: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            (xy[i].0 - xy[j].0).powi(2) + (xy[i].1 - xy[j].1).powi(2)
        })
        .collect();
    bandwidths
        .par_iter()
        .map(|&h| {
            let mut sse = 0.0;
            for i in 0..n {
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..n {
                    if i != j {
                        let w = kernel(d2[i * n + j], h);
                        num += w * y[j];
                        den += w;
                    }
                }
                if den <= 0.0 {
                    return f64::INFINITY;
                }
                sse += (y[i] - num / den).powi(2);
            }
            if n == 0 {
                f64::INFINITY
            } else {
                sse / n as f64
            }
        })
        .collect()
}

/// Bandwidth with the smallest LOO error; ties go to the smaller bandwidth.
pub fn select_bandwidth(xy: &[(f64, f64)], y: &[f64], bandwidths: &[f64]) -> (f64, Vec<(f64, f64)>) {
    let scores = loo_scores(xy, y, bandwidths);
    let mut pairs: Vec<(f64, f64)> = bandwidths.iter().copied().zip(scores).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = pairs[0];
    for &p in &pairs[1..] {
        if p.1 < best.1 {
            best = p;
        }
    }
    (best.0, pairs)
}

/// Grid points inside the triangle, row by row from the base.
pub fn triangle_grid(resolution: usize) -> Vec<(f64, f64)> {
    let step = 1.0 / resolution as f64;
    let rows = (TRIANGLE_HEIGHT / step).floor() as usize;
    let mut out = Vec::new();
    for r in 0..=rows {
        let y = r as f64 * step;
        for c in 0..=resolution {
            let x = c as f64 * step;
            let inside = y <= TRIANGLE_HEIGHT * 2.0 * x + 1e-12 && y <= TRIANGLE_HEIGHT * 2.0 * (1.0 - x) + 1e-12;
            if inside {
                out.push((x, y));
            }
        }
    }
    out
}

pub fn nw_surface(points: &[SimplexPoint], cfg: &NwConfig) -> Result<KernelSurface, AnalysisError> {
    let pts: Vec<&SimplexPoint> = points.iter().filter(|p| p.gold.is_some()).collect();
    if pts.is_empty() {
        return Err(AnalysisError::TooFewPoints(0));
    }
    if cfg.bandwidths.is_empty() || cfg.bandwidths.iter().any(|&h| !(h > 0.0)) {
        return Err(AnalysisError::Invalid("bandwidths must be positive".into()));
    }
    let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.gold.unwrap()).collect();
    let (h, loo) = select_bandwidth(&xy, &y, &cfg.bandwidths);
    let cells: Vec<SurfaceCell> = triangle_grid(cfg.resolution.max(1))
        .into_par_iter()
        .map(|(gx, gy)| {
            let (mut num, mut den) = (0.0, 0.0);
            for (p, yi) in xy.iter().zip(&y) {
                let w = kernel((p.0 - gx).powi(2) + (p.1 - gy).powi(2), h);
                num += w * yi;
                den += w;
            }
            let value = (den >= cfg.w_min && den > 0.0).then(|| num / den);
            SurfaceCell {
                x: gx,
                y: gy,
                weight: den,
                value,
            }
        })
        .collect();
    if cells.iter().all(|c| c.value.is_none()) {
        return Err(AnalysisError::AllMasked);
    }
    Ok(KernelSurface {
        bandwidth: h,
        w_min: cfg.w_min,
        loo_scores: loo,
        cells,
    })
}
