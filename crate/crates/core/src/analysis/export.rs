//! Long-format exports and static SVG renderings of the analyses.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{GroupProfile, KernelSurface, SimplexPoint, TRIANGLE_HEIGHT};
use crate::explain::Attribution;
use crate::features::{AblationRow, Feature, FeatureRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqSimRow {
    pub item_id: String,
    pub char_similarity: Option<f64>,
    pub log_frequency: Option<f64>,
    pub gold: Option<f64>,
    pub phi_char_similarity: f64,
    pub phi_log_frequency: f64,
    pub edit_distance_norm: Option<f64>,
}

/// Join features, attributions and ablation rows by position. All slices
/// must describe the same items in the same order.
pub fn frequency_similarity_export(
    rows: &[FeatureRow],
    attrs: &[Attribution],
    ablation: &[AblationRow],
    gold: &[Option<f64>],
) -> Vec<FreqSimRow> {
    rows.iter()
        .zip(attrs)
        .zip(ablation)
        .zip(gold)
        .map(|(((r, a), ab), g)| FreqSimRow {
            item_id: r.item_id.clone(),
            char_similarity: r.get(Feature::CharSimilarity),
            log_frequency: r.get(Feature::LogFrequency),
            gold: *g,
            phi_char_similarity: a.phi_of(Feature::CharSimilarity),
            phi_log_frequency: a.phi_of(Feature::LogFrequency),
            edit_distance_norm: ab.edit_distance_norm,
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_freq_sim_csv<W: Write>(rows: &[FreqSimRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "item_id",
        "char_similarity",
        "log_frequency",
        "gold",
        "phi_char_similarity",
        "phi_log_frequency",
        "edit_distance_norm",
    ])?;
    for r in rows {
        w.write_record([
            r.item_id.clone(),
            opt(r.char_similarity),
            opt(r.log_frequency),
            opt(r.gold),
            r.phi_char_similarity.to_string(),
            r.phi_log_frequency.to_string(),
            opt(r.edit_distance_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Diverging red–yellow–green colour for `t` in [0, 1].
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g) = if t < 0.5 {
        (215.0, 48.0 + (255.0 - 48.0) * t * 2.0)
    } else {
        (215.0 - (215.0 - 26.0) * (t - 0.5) * 2.0, 255.0 - (255.0 - 150.0) * (t - 0.5) * 2.0)
    };
    format!("rgb({},{},{})", r as u8, g as u8, 65)
}

/// Triangle scatter with the kernel surface underneath. Higher gold scores
/// (easier items) are drawn greener.
pub fn simplex_svg(points: &[SimplexPoint], surface: Option<&KernelSurface>) -> String {
    let size = 520.0;
    let pad = 30.0;
    let sx = |x: f64| pad + x * (size - 2.0 * pad);
    let sy = |y: f64| size - pad - y * (size - 2.0 * pad);
    let golds: Vec<f64> = points.iter().filter_map(|p| p.gold).collect();
    let (lo, hi) = golds
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    let norm = |g: f64| if hi > lo { (g - lo) / (hi - lo) } else { 0.5 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    if let Some(surf) = surface {
        let cell = if surf.cells.len() > 1 {
            (surf.cells[1].x - surf.cells[0].x).abs().max(1e-3) * (size - 2.0 * pad)
        } else {
            4.0
        };
        for c in &surf.cells {
            if let Some(v) = c.value {
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}" fill-opacity="0.35"/>"#,
                    sx(c.x) - cell / 2.0,
                    sy(c.y) - cell / 2.0,
                    ramp(norm(v))
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="black"/>"#,
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(0.0),
        sx(0.5),
        sy(TRIANGLE_HEIGHT)
    );
    for p in points {
        let fill = p.gold.map_or("gray".to_string(), |g| ramp(norm(g)));
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{fill}"/>"#,
            sx(p.x),
            sy(p.y)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" font-size="12">familiarity</text>"#, sx(0.0) - 20.0, sy(0.0) + 18.0);
    let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" font-size="12">form</text>"#, sx(1.0) - 10.0, sy(0.0) + 18.0);
    let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" font-size="12">meaning</text>"#, sx(0.5) - 22.0, sy(TRIANGLE_HEIGHT) - 8.0);
    s.push_str("</svg>\n");
    s
}

const GROUP_COLOURS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

/// Stacked area chart of the rolling group shares.
pub fn profile_svg(profile: &GroupProfile) -> String {
    let (w, h, pad) = (720.0, 300.0, 20.0);
    let n = profile.items.len().max(1);
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n.max(2) - 1) as f64;
    let y = |v: f64| h - pad - v * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let mut lower = vec![0.0; profile.items.len()];
    for (g, colour) in GROUP_COLOURS.iter().enumerate() {
        let upper: Vec<f64> = profile
            .items
            .iter()
            .zip(&lower)
            .map(|(it, l)| l + it.rolling[g])
            .collect();
        let mut pts = String::new();
        for (i, u) in upper.iter().enumerate() {
            let _ = write!(pts, "{:.2},{:.2} ", x(i), y(*u));
        }
        for (i, l) in lower.iter().enumerate().rev() {
            let _ = write!(pts, "{:.2},{:.2} ", x(i), y(*l));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{colour}"/>"#, pts.trim_end());
        lower = upper;
    }
    s.push_str("</svg>\n");
    s
}
