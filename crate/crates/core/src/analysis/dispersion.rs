//! Two-sample location and scale tests, and the POS-competition error
//! dispersion study.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use super::AnalysisError;
use crate::corpus::L1;
use crate::stats::{average_ranks, mean, median, std_dev, variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn need(a: &[f64], b: &[f64], min: usize) -> Result<(), AnalysisError> {
    let n = a.len().min(b.len());
    if n < min {
        return Err(AnalysisError::TooFewPoints(n));
    }
    Ok(())
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    need(a, b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a, 1).unwrap() / na, variance(b, 1).unwrap() / nb);
    let diff = mean(a).unwrap() - mean(b).unwrap();
    if va + vb == 0.0 {
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        return Ok(TestResult {
            statistic: if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY },
            p_value: p,
        });
    }
    let t = diff / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| AnalysisError::Invalid(e.to_string()))?;
    Ok(TestResult {
        statistic: t,
        p_value: (2.0 * dist.sf(t.abs())).min(1.0),
    })
}

/// Number of ways to reach each U value with `m` and `n` observations.
fn mann_whitney_counts(m: usize, n: usize) -> Vec<f64> {
    // f[i][j][u]: permutations of i x's and j y's with statistic u
    let max_u = m * n;
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n + 1];
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    for i in 1..=m {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n + 1];
        cur[0][0] = 1.0;
        for j in 1..=n {
            for u in 0..=i * j {
                // last element is an x (contributes j) or a y (contributes 0)
                let from_x = if u >= j { prev[j][u - j] } else { 0.0 };
                let from_y = cur[j - 1][u];
                cur[j][u] = from_x + from_y;
            }
        }
        prev = cur;
    }
    prev[n].clone()
}

/// Wilcoxon–Mann–Whitney, two-sided. Exact null distribution when both
/// samples have at most 20 observations and there are no ties; otherwise
/// the normal approximation with tie and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    need(a, b, 1)?;
    let (n1, n2) = (a.len(), b.len());
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&all);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let u2 = (n1 * n2) as f64 - u1;
    let u = u1.max(u2);

    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }

    if n1 <= 20 && n2 <= 20 && tie_term == 0.0 {
        let counts = mann_whitney_counts(n1, n2);
        let total: f64 = counts.iter().sum();
        let k = u.round() as usize;
        let upper: f64 = counts[k..].iter().sum::<f64>() / total;
        return Ok(TestResult {
            statistic: u1,
            p_value: (2.0 * upper).min(1.0),
        });
    }
    let n = (n1 + n2) as f64;
    let mu = (n1 * n2) as f64 / 2.0;
    let sigma2 = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if sigma2 <= 0.0 {
        return Ok(TestResult {
            statistic: u1,
            p_value: 1.0,
        });
    }
    let z = (u - mu - 0.5) / sigma2.sqrt();
    Ok(TestResult {
        statistic: u1,
        p_value: (2.0 * std_normal().sf(z)).min(1.0),
    })
}

fn one_way_anova(groups: &[Vec<f64>]) -> Result<TestResult, AnalysisError> {
    let k = groups.len() as f64;
    let n: f64 = groups.iter().map(|g| g.len() as f64).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g).unwrap();
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let (d1, d2) = (k - 1.0, n - k);
    if ssw == 0.0 {
        let p = if ssb == 0.0 { 1.0 } else { 0.0 };
        return Ok(TestResult {
            statistic: if ssb == 0.0 { 0.0 } else { f64::INFINITY },
            p_value: p,
        });
    }
    let f = (ssb / d1) / (ssw / d2);
    let dist = FisherSnedecor::new(d1, d2).map_err(|e| AnalysisError::Invalid(e.to_string()))?;
    Ok(TestResult {
        statistic: f,
        p_value: dist.sf(f),
    })
}

/// Brown–Forsythe: ANOVA on absolute deviations from the group medians.
pub fn brown_forsythe(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    need(a, b, 2)?;
    let dev = |x: &[f64]| {
        let m = median(x).unwrap();
        x.iter().map(|v| (v - m).abs()).collect::<Vec<_>>()
    };
    one_way_anova(&[dev(a), dev(b)])
}

/// Fligner–Killeen (median-centred) with the chi-square approximation on
/// normal scores of the ranked absolute deviations.
pub fn fligner_killeen(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    need(a, b, 2)?;
    let groups = [a, b];
    let mut absdev = Vec::new();
    let mut sizes = Vec::new();
    for g in groups {
        let m = median(g).unwrap();
        absdev.extend(g.iter().map(|v| (v - m).abs()));
        sizes.push(g.len());
    }
    let n = absdev.len() as f64;
    let ranks = average_ranks(&absdev);
    let normal = std_normal();
    let scores: Vec<f64> = ranks
        .iter()
        .map(|r| normal.inverse_cdf(0.5 + r / (2.0 * (n + 1.0))))
        .collect();
    let abar = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - abar).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let mut stat = 0.0;
    let mut start = 0;
    for &sz in &sizes {
        let m = scores[start..start + sz].iter().sum::<f64>() / sz as f64;
        stat += sz as f64 * (m - abar).powi(2);
        start += sz;
    }
    stat /= var;
    let dist = ChiSquared::new((sizes.len() - 1) as f64).map_err(|e| AnalysisError::Invalid(e.to_string()))?;
    Ok(TestResult {
        statistic: stat,
        p_value: dist.sf(stat),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub l1: L1,
    pub n_no: usize,
    pub n_yes: usize,
    pub std_no: f64,
    pub std_yes: f64,
    pub ratio: f64,
    pub welch_p: f64,
    pub wmw_p: f64,
    pub bf_p: f64,
    pub fk_p: f64,
}

/// Compare prediction errors (gold − predicted) of items with and without
/// POS competition.
pub fn pos_dispersion_study(l1: L1, errors: &[f64], flags: &[bool]) -> Result<DispersionReport, AnalysisError> {
    if errors.len() != flags.len() {
        return Err(AnalysisError::Invalid("errors and flags differ in length".into()));
    }
    let yes: Vec<f64> = errors.iter().zip(flags).filter(|(_, &f)| f).map(|(e, _)| *e).collect();
    let no: Vec<f64> = errors.iter().zip(flags).filter(|(_, &f)| !f).map(|(e, _)| *e).collect();
    need(&yes, &no, 2)?;
    let std_no = std_dev(&no, 1).unwrap();
    let std_yes = std_dev(&yes, 1).unwrap();
    Ok(DispersionReport {
        l1,
        n_no: no.len(),
        n_yes: yes.len(),
        std_no,
        std_yes,
        ratio: std_yes / std_no,
        welch_p: welch_t_test(&yes, &no)?.p_value,
        wmw_p: mann_whitney_u(&yes, &no)?.p_value,
        bf_p: brown_forsythe(&yes, &no)?.p_value,
        fk_p: fligner_killeen(&yes, &no)?.p_value,
    })
}
