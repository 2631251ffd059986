mod common;

use common::{brute_force_cosine, ref_pearson, ref_rmse, ref_spearman};
use lexdiff_core::eval::{pearson, rmse, spearman};
use lexdiff_core::features::CharVectorizer;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[char], max_len: usize) -> String {
    let n = rng.random_range(1..=max_len);
    (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

#[test]
fn char_similarity_matches_dense_enumeration() {
    let alphabet: Vec<char> = "abcdelnorst".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for round in 0..25 {
        let corpus: Vec<String> = (0..40).map(|_| random_word(&mut rng, &alphabet, 8)).collect();
        let vec = CharVectorizer::fit(&corpus).unwrap();
        for _ in 0..20 {
            // Mix in-corpus words and unseen words.
            let a = if rng.random_bool(0.5) {
                corpus[rng.random_range(0..corpus.len())].clone()
            } else {
                random_word(&mut rng, &alphabet, 9)
            };
            let b = random_word(&mut rng, &alphabet, 9);
            let got = vec.similarity(&a, &b);
            let want = brute_force_cosine(&corpus, &a, &b);
            assert!((got - want).abs() <= 1e-10, "round {round}: {a} / {b}: {got} vs {want}");
            assert!((vec.similarity(&b, &a) - got).abs() <= 1e-12);
        }
    }
}

#[test]
fn cable_kabel_matches_oracle() {
    let corpus: Vec<String> = ["cable", "kabel", "table", "haus", "house", "kino"].iter().map(|s| s.to_string()).collect();
    let vec = CharVectorizer::fit(&corpus).unwrap();
    let want = brute_force_cosine(&corpus, "cable", "kabel");
    assert!(want > 0.0 && want < 1.0);
    assert!((vec.similarity("cable", "Kabel") - want).abs() < 1e-12);
}

#[test]
fn scripts_without_shared_ngrams_are_orthogonal() {
    let vec = CharVectorizer::fit(["cable", "电缆", "house", "房子", "kabel"]).unwrap();
    assert_eq!(vec.similarity("cable", "电缆"), 0.0);
    assert_eq!(vec.similarity("house", "房子"), 0.0);
    assert_eq!(vec.similarity("cable", "cable"), 1.0);
    assert_eq!(vec.similarity("电缆", "电缆"), 1.0);
}

#[test]
fn metrics_match_direct_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..1000 {
        let n = rng.random_range(3..60);
        let ties = k % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if ties {
                rng.random_range(0..4) as f64
            } else {
                rng.random_range(-5.0..5.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        assert!((rmse(&x, &y).unwrap() - ref_rmse(&x, &y)).abs() <= 1e-12);
        let want = ref_pearson(&x, &y);
        match pearson(&x, &y) {
            Some(r) => assert!((r - want).abs() <= 1e-12, "{r} vs {want}"),
            None => assert!(!want.is_finite()),
        }
        let want = ref_spearman(&x, &y);
        match spearman(&x, &y) {
            Some(r) => assert!((r - want).abs() <= 1e-12),
            None => assert!(!want.is_finite()),
        }
    }
}

#[test]
fn spearman_monotone_and_reversed() {
    let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.7 - 3.0).collect();
    let cubed: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
    let rev: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((spearman(&x, &cubed).unwrap() - 1.0).abs() < 1e-12);
    assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn similarity_symmetric_and_bounded(a in "[a-f]{0,7}", b in "[a-f]{0,7}", extra in proptest::collection::vec("[a-f]{1,6}", 1..10)) {
        let vec = CharVectorizer::fit(extra.iter().chain([&a, &b]).filter(|s| !s.is_empty())).unwrap();
        let s = vec.similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s - vec.similarity(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn rmse_symmetric_and_shift_invariant(
        v in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50),
        c in -100.0f64..100.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let r = rmse(&a, &b).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!((r - rmse(&b, &a).unwrap()).abs() < 1e-12);
        let a2: Vec<f64> = a.iter().map(|x| x + c).collect();
        let b2: Vec<f64> = b.iter().map(|x| x + c).collect();
        prop_assert!((r - rmse(&a2, &b2).unwrap()).abs() < 1e-9 * r.max(1.0));
    }

    #[test]
    fn pearson_affine_invariant(
        v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..50),
        s in 0.1f64..10.0,
        c in -10.0f64..10.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        if let Some(r) = pearson(&a, &b) {
            prop_assert!((-1.0..=1.0).contains(&r));
            let a2: Vec<f64> = a.iter().map(|x| s * x + c).collect();
            prop_assert!((r - pearson(&a2, &b).unwrap()).abs() < 1e-9);
        }
    }
}
