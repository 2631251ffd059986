use lexdiff_core::analysis::{
    aitchison_total_variance, brown_forsythe, fligner_killeen, mann_whitney_u, nw_surface, rolling_mean,
    select_bandwidth, total_variance, welch_t_test, NwConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{brute_loo, random_points};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300) || (a - b).abs() <= 1e-12
}

// Reference values computed with scipy.stats 1.15 (ttest_ind with
// equal_var=False, mannwhitneyu two-sided with continuity, levene with
// center='median', fligner with center='median').
#[test]
fn continuous_samples_match_reference() {
    let a = [0.001, 0.299, -0.274, -0.891, -0.455, -0.992, 0.06, 1.34, -0.492, -0.62, 0.49, 0.357, 0.105, -0.93, -0.029, 0.695, -1.344, -0.458, -1.901, -1.29, -1.842, -0.235, -1.267, 0.271, 0.157, -0.187, -2.517, -0.539, -0.049, 0.113, -1.53, -0.478, -0.979, -0.809, 1.061, -0.808, -0.033, 0.884, -0.584, -0.112];
    let b = [0.499, 0.415, -1.905, 0.437, 2.746, -2.485, 1.847, 0.515, -0.855, 3.901, 1.672, -1.859, 0.434, 1.338, -0.04, 1.529, 0.18, 1.501, 2.889, -0.916, 0.666, -0.534, 0.529, -1.837, -0.743, -0.053, 1.918, 2.361, -2.082, -1.13, 1.464, -3.286, -0.534, 0.125, 2.563, 1.541, -0.289, -0.363, -0.15, 3.042, -0.47, -0.247, 0.935, 0.083, -0.055, -1.705, 0.279, -0.498, 2.399, 1.476, 0.257, 1.503, -0.312, 2.194, 0.29];
    let w = welch_t_test(&a, &b).unwrap();
    assert!(close(w.statistic, -3.2370717663995636, 1e-10));
    assert!(close(w.p_value, 0.0017095128909181084, 1e-7));
    let m = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(m.statistic, 709.0);
    assert!(close(m.p_value, 0.00324508304692619, 1e-7));
    let l = brown_forsythe(&a, &b).unwrap();
    assert!(close(l.statistic, 10.377964972008414, 1e-10));
    assert!(close(l.p_value, 0.001758072476988902, 1e-7));
    let f = fligner_killeen(&a, &b).unwrap();
    assert!(close(f.statistic, 8.578099223867113, 1e-9));
    assert!(close(f.p_value, 0.0034023035134553023, 1e-7));
}

#[test]
fn tied_samples_match_reference() {
    let a = [0.5, -1.5, 0.5, -1.5, -2.0, -0.5, -1.0, 0.0, 2.0, -1.0, -0.5, 0.0, 0.5, -0.0, -0.0, 0.5, 0.5, -1.0, -0.0, 0.0, -1.0, 0.5, -1.0, 1.0, 0.0, 0.0, -0.5, -0.0, -2.0, -1.0];
    let b = [1.0, -2.5, 2.0, -2.0, 1.5, -1.0, 1.5, 0.5, -2.0, 2.5, 2.5, 0.5, 0.0, 0.5, -1.0, 2.0, -0.5, 0.5, -0.5, -0.5, -1.5, 2.5, 0.5, 2.0, 0.5];
    let w = welch_t_test(&a, &b).unwrap();
    assert!(close(w.p_value, 0.0670941145573088, 1e-7));
    let m = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(m.statistic, 264.0);
    assert!(close(m.p_value, 0.05898041776945182, 1e-7));
    let l = brown_forsythe(&a, &b).unwrap();
    assert!(close(l.statistic, 5.717486479526138, 1e-10));
    assert!(close(l.p_value, 0.020379640890302236, 1e-7));
    let f = fligner_killeen(&a, &b).unwrap();
    assert!(close(f.statistic, 5.534560881824171, 1e-9));
    assert!(close(f.p_value, 0.018644443622215436, 1e-7));
}

#[test]
fn small_samples_use_exact_distribution() {
    let a = [-0.694, -0.327, -0.56, 0.008, -0.375, -0.3, -1.379, -0.807, 1.654];
    let b = [0.329, -0.054, 1.337, 2.407, -0.454, 0.791, 0.368, -0.761, 1.735, 0.977, 1.071, 0.248];
    let m = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(m.statistic, 21.0);
    assert!(close(m.p_value, 0.0183853298404382, 1e-10));
    let w = welch_t_test(&a, &b).unwrap();
    assert!(close(w.p_value, 0.019981690200667045, 1e-7));
    assert!(close(brown_forsythe(&a, &b).unwrap().p_value, 0.39200847780511017, 1e-7));
    assert!(close(fligner_killeen(&a, &b).unwrap().p_value, 0.23761341073650838, 1e-7));
}

#[test]
fn linear_field_bandwidth_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts = random_points(&mut rng, 80);
    let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.gold.unwrap()).collect();
    let grid = lexdiff_core::analysis::default_bandwidth_grid();
    let (h, scores) = select_bandwidth(&xy, &y, &grid);
    let mut best = (f64::INFINITY, 0.0);
    for &g in &grid {
        let e = brute_loo(&xy, &y, g);
        if e < best.0 {
            best = (e, g);
        }
    }
    assert_eq!(h, best.1);
    for (g, s) in scores {
        let b = brute_loo(&xy, &y, g);
        assert!(s == b || (s - b).abs() < 1e-10 * b.abs().max(1.0));
    }
}

#[test]
fn constant_field_is_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pts = random_points(&mut rng, 60);
    for p in &mut pts {
        p.gold = Some(1.5);
    }
    let cfg = NwConfig { bandwidths: vec![0.3], ..Default::default() };
    let s = nw_surface(&pts, &cfg).unwrap();
    assert_eq!(s.bandwidth, 0.3);
    assert!(s.cells.iter().filter_map(|c| c.value).all(|v| (v - 1.5).abs() < 1e-12));
    assert!(s.cells.iter().any(|c| c.value.is_some()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn surface_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, 40);
        let lo = pts.iter().map(|p| p.gold.unwrap()).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.gold.unwrap()).fold(f64::NEG_INFINITY, f64::max);
        let cfg = NwConfig { resolution: 25, ..Default::default() };
        if let Ok(s) = nw_surface(&pts, &cfg) {
            for v in s.cells.iter().filter_map(|c| c.value) {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn totvar_scale_invariant(
        comps in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 3), 2..30),
        scale in proptest::collection::vec(0.1f64..10.0, 3),
    ) {
        let scaled: Vec<Vec<f64>> = comps
            .iter()
            .map(|c| c.iter().zip(&scale).map(|(v, s)| v * s).collect())
            .collect();
        let a = total_variance(&comps, 1e-4);
        let b = total_variance(&scaled, 1e-4);
        prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn dispersion_tests_shift_invariant(
        a in proptest::collection::vec(-5.0f64..5.0, 25..40),
        b in proptest::collection::vec(-5.0f64..5.0, 25..40),
        c in -3.0f64..3.0,
    ) {
        // Shift by a value exactly representable after rounding so that
        // differences are preserved bit-for-bit.
        let c = (c * 8.0).round() / 8.0;
        let a: Vec<f64> = a.iter().map(|v| (v * 8.0).round() / 8.0).collect();
        let b: Vec<f64> = b.iter().map(|v| (v * 8.0).round() / 8.0).collect();
        let sa: Vec<f64> = a.iter().map(|v| v + c).collect();
        let sb: Vec<f64> = b.iter().map(|v| v + c).collect();
        let na: Vec<f64> = a.iter().map(|v| -v).collect();
        let nb: Vec<f64> = b.iter().map(|v| -v).collect();
        for (x, y) in [(&sa, &sb)] {
            prop_assert!((welch_t_test(&a, &b).unwrap().p_value - welch_t_test(x, y).unwrap().p_value).abs() < 1e-9);
            prop_assert!((mann_whitney_u(&a, &b).unwrap().p_value - mann_whitney_u(x, y).unwrap().p_value).abs() < 1e-9);
        }
        for (x, y) in [(&sa, &sb), (&na, &nb)] {
            prop_assert!((brown_forsythe(&a, &b).unwrap().p_value - brown_forsythe(x, y).unwrap().p_value).abs() < 1e-9);
            prop_assert!((fligner_killeen(&a, &b).unwrap().p_value - fligner_killeen(x, y).unwrap().p_value).abs() < 1e-9);
        }
    }

    #[test]
    fn rolling_mean_stays_compositional(raw in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 4), 1..40)) {
        let comps: Vec<[f64; 4]> = raw
            .iter()
            .map(|v| {
                let s: f64 = v.iter().sum::<f64>().max(1e-9);
                [v[0] / s, v[1] / s, v[2] / s, v[3] / s]
            })
            .filter(|c| (c.iter().sum::<f64>() - 1.0).abs() < 1e-9)
            .collect();
        for r in rolling_mean(&comps, 10) {
            prop_assert!(r.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn bootstrap_is_seeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let comps: Vec<Vec<f64>> = (0..100)
        .map(|_| vec![rng.random_range(0.1..1.0), rng.random_range(0.0..0.5), rng.random_range(0.0..1.0)])
        .collect();
    let a = aitchison_total_variance(&comps, 1e-4, 200, 3).unwrap();
    let b = aitchison_total_variance(&comps, 1e-4, 200, 3).unwrap();
    assert_eq!(a, b);
    assert!(a.ci_low <= a.totvar && a.totvar <= a.ci_high);
}
