mod common;

use common::{brute_force_shap, random_tree};
use lexdiff_core::explain::{group_importance, shap_dense, tree_shap_single};
use lexdiff_core::features::N_FEATURES;
use lexdiff_core::model::{Node, SplitRule, Tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn depth2_tree() -> Tree {
    // x0 <= 0 ? (x1 <= 0 ? 1 : 3) : (x2 <= 0 ? -2 : 4)
    let split = |feature, left, right, default_left| {
        Some(SplitRule {
            feature,
            threshold: 0.0,
            left,
            right,
            default_left,
            gain: 1.0,
        })
    };
    Tree {
        nodes: vec![
            Node { value: 0.0, cover: 10.0, split: split(0, 1, 2, true) },
            Node { value: 0.0, cover: 6.0, split: split(1, 3, 4, false) },
            Node { value: 0.0, cover: 4.0, split: split(2, 5, 6, true) },
            Node { value: 1.0, cover: 2.0, split: None },
            Node { value: 3.0, cover: 4.0, split: None },
            Node { value: -2.0, cover: 3.0, split: None },
            Node { value: 4.0, cover: 1.0, split: None },
        ],
    }
}

#[test]
fn depth_two_tree_matches_exhaustive_coalitions() {
    let t = depth2_tree();
    for x in [[-1.0, -1.0, -1.0], [-1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, -1.0, f64::NAN]] {
        let mut phi = vec![0.0; 3];
        tree_shap_single(&t, &x, &mut phi);
        let oracle = brute_force_shap(&t, &x);
        for k in 0..3 {
            assert!((phi[k] - oracle[k]).abs() < 1e-12, "{x:?} {phi:?} {oracle:?}");
        }
        let pred = t.predict(&x);
        assert!((t.expected_value() + phi.iter().sum::<f64>() - pred).abs() < 1e-12);
    }
}

#[test]
fn single_leaf_ensemble() {
    let t = Tree {
        nodes: vec![Node { value: 2.5, cover: 5.0, split: None }],
    };
    let (base, phi) = shap_dense(&[t], 0.1, 1.0, &[0.3, 0.7]);
    assert!((base - 1.25).abs() < 1e-12);
    assert_eq!(phi, vec![0.0, 0.0]);
}

#[test]
fn repeated_feature_on_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let t = random_tree(&mut rng, 2, 3);
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut phi = vec![0.0; 2];
        tree_shap_single(&t, &x, &mut phi);
        let o = brute_force_shap(&t, &x);
        assert!((phi[0] - o[0]).abs() < 1e-9 && (phi[1] - o[1]).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn local_accuracy_and_dummy(seed in any::<u64>(), nf in 1usize..8, depth in 1usize..4, ntrees in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees: Vec<Tree> = (0..ntrees).map(|_| random_tree(&mut rng, nf, depth)).collect();
        // one extra feature that no tree uses
        let x: Vec<f64> = (0..=nf).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (base, phi) = shap_dense(&trees, 0.3, 0.5, &x);
        let pred = 0.5 + trees.iter().map(|t| 0.3 * t.predict(&x)).sum::<f64>();
        prop_assert!((base + phi.iter().sum::<f64>() - pred).abs() <= 1e-9);
        prop_assert_eq!(phi[nf], 0.0);
    }

    #[test]
    fn shares_sum_to_one(phi in proptest::collection::vec(-5.0f64..5.0, N_FEATURES)) {
        let (s, degenerate) = group_importance(&phi);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(s.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(degenerate, phi.iter().all(|&v| v == 0.0));
    }
}
