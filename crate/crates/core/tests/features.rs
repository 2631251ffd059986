use lexdiff_core::corpus::{ConfusorPatterns, Split, L1};
use lexdiff_core::features::{
    efllex_span, extract_features, fit_vectorizer_on_items, read_features_csv, syllable_count, write_features_csv,
    zipf, zipf_frequency, Feature, N_FEATURES,
};
use lexdiff_core::fixtures::{SyntheticConfig, SyntheticData};
use lexdiff_core::resources::{load_resource_bundle, ResourceKind};
use proptest::prelude::*;

/// Syllable counts from a pronouncing dictionary.
const SYLLABLES: &[(&str, u32)] = &[
    ("cat", 1), ("dog", 1), ("house", 1), ("make", 1), ("time", 1), ("name", 1), ("home", 1),
    ("love", 1), ("have", 1), ("give", 1), ("live", 1), ("come", 1), ("some", 1), ("one", 1),
    ("three", 1), ("tree", 1), ("free", 1), ("see", 1), ("the", 1), ("be", 1), ("he", 1),
    ("we", 1), ("she", 1), ("strength", 1), ("world", 1), ("school", 1), ("book", 1),
    ("through", 1), ("thought", 1), ("light", 1), ("night", 1), ("write", 1), ("white", 1),
    ("smile", 1), ("walked", 1), ("jumped", 1), ("stone", 1), ("bread", 1), ("cake", 1),
    ("table", 2), ("apple", 2), ("water", 2), ("people", 2), ("little", 2), ("simple", 2),
    ("purple", 2), ("candle", 2), ("orange", 2), ("language", 2), ("knowledge", 2),
    ("science", 2), ("music", 2), ("paper", 2), ("pencil", 2), ("window", 2), ("garden", 2),
    ("yellow", 2), ("happy", 2), ("open", 2), ("river", 2), ("mountain", 2), ("teacher", 2),
    ("student", 2), ("children", 2), ("morning", 2), ("because", 2), ("before", 2),
    ("after", 2), ("over", 2), ("under", 2), ("about", 2), ("again", 2), ("away", 2),
    ("create", 2), ("hello", 2), ("zero", 2), ("hero", 2), ("cable", 2), ("bottle", 2),
    ("puzzle", 2), ("circle", 2), ("business", 2), ("poem", 2), ("quiet", 2), ("being", 2),
    ("wanted", 2), ("banana", 3), ("computer", 3), ("elephant", 3), ("beautiful", 3),
    ("family", 3), ("animal", 3), ("important", 3), ("idea", 3), ("video", 3), ("radio", 3),
    ("piano", 3), ("tomato", 3), ("potato", 3), ("every", 3), ("area", 3), ("energy", 3),
    ("holiday", 3), ("several", 3), ("remember", 3), ("tomorrow", 3), ("example", 3),
    ("education", 4), ("information", 4), ("difficulty", 4), ("television", 4),
    ("america", 4), ("experience", 4), ("university", 5), ("communication", 5),
    ("vocabulary", 5),
];

#[test]
fn syllable_estimate_agrees_with_dictionary() {
    assert!(SYLLABLES.len() >= 100);
    let agree = SYLLABLES.iter().filter(|(w, n)| syllable_count(w) == *n).count();
    let rate = agree as f64 / SYLLABLES.len() as f64;
    assert!(rate >= 0.85, "agreement {rate:.3}");
}

proptest! {
    #[test]
    fn zipf_is_monotone(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
        let (za, zb) = (zipf(a).unwrap(), zipf(b).unwrap());
        prop_assert_eq!(a < b, za < zb);
        prop_assert!((zipf(a * 10.0).unwrap() - za - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unseen_words_sit_below_the_observed_floor(f_min in 0.0f64..5.0) {
        let (z, substituted) = zipf_frequency(None, f_min);
        prop_assert!(substituted);
        prop_assert_eq!(z, f_min - 0.5);
    }

    #[test]
    fn span_counts_nonzero_bands_and_ignores_order(bands in proptest::array::uniform5(prop_oneof![Just(0.0f64), 0.0f64..1.0]), rot in 0usize..5) {
        let span = efllex_span(&bands);
        prop_assert_eq!(span as usize, bands.iter().filter(|&&b| b > 0.0).count());
        let mut r = bands;
        r.rotate_left(rot);
        prop_assert_eq!(efllex_span(&r), span);
    }
}

#[test]
fn zipf_rejects_nonpositive() {
    assert!(zipf(0.0).is_err());
    assert!(zipf(-1.0).is_err());
    assert!(zipf(f64::NAN).is_err());
    assert_eq!(zipf(1.0).unwrap(), 3.0);
}

fn fixture() -> SyntheticData {
    SyntheticData::generate(&SyntheticConfig {
        split_sizes: [120, 20, 40],
        ..SyntheticConfig::default()
    })
}

#[test]
fn anchor_item_features() {
    let data = fixture();
    let conf = ConfusorPatterns::default();
    let mut sims = Vec::new();
    for l1 in L1::ALL {
        let train = data.items(l1, Split::Train);
        let vec = fit_vectorizer_on_items(train).unwrap();
        let cable = train.iter().find(|i| i.target_word == "cable").unwrap();
        let row = extract_features(cable, &data.bundle, &vec, &conf);
        assert_eq!(row.get(Feature::SenseCount), Some(6.0));
        assert_eq!(row.get(Feature::TargetWordLength), Some(5.0));
        assert_eq!(row.get(Feature::SyllableCount), Some(2.0));
        assert_eq!(row.clue_letter, "c");
        assert!(!row.is_missing(Feature::LogFrequency));
        let sim = row.get(Feature::CharSimilarity).unwrap();
        sims.push(sim);
        match l1 {
            L1::De => assert_eq!(row.l1_initial_letter, "k"),
            L1::Es => {
                assert_eq!(row.l1_initial_letter, "c");
                assert_eq!(sim, 1.0);
            }
            L1::Zh => assert_eq!(sim, 0.0),
        }
    }
    assert!(sims[1] > 0.0 && sims[1] < 1.0, "de cable/Kabel similarity {}", sims[1]);
}

#[test]
fn every_zh_item_has_zero_similarity() {
    let data = fixture();
    let train = data.items(L1::Zh, Split::Train);
    let vec = fit_vectorizer_on_items(train).unwrap();
    for it in data.items(L1::Zh, Split::Test) {
        let row = extract_features(it, &data.bundle, &vec, &ConfusorPatterns::default());
        assert_eq!(row.get(Feature::CharSimilarity), Some(0.0), "{}", it.target_word);
    }
}

#[test]
fn features_csv_round_trip() {
    let data = fixture();
    let items = data.items(L1::Es, Split::Dev);
    let vec = fit_vectorizer_on_items(data.items(L1::Es, Split::Train)).unwrap();
    let rows: Vec<_> = items
        .iter()
        .map(|i| extract_features(i, &data.bundle, &vec, &ConfusorPatterns::default()))
        .collect();
    let mut buf = Vec::new();
    write_features_csv(&rows, &mut buf).unwrap();
    let header = String::from_utf8_lossy(&buf).lines().next().unwrap().to_string();
    for f in Feature::ALL {
        assert!(header.split(',').any(|c| c == f.name()), "{} missing", f.name());
    }
    let back = read_features_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.item_id, b.item_id);
        assert_eq!(a.missing, b.missing);
        assert_eq!(a.clue_letter, b.clue_letter);
        for k in 0..N_FEATURES {
            assert_eq!(a.values[k], b.values[k]);
        }
    }
}

#[test]
fn canonical_resources_reload_identically() {
    let data = fixture();
    let dir = tempfile::tempdir().unwrap();
    let cfg = data.bundle.write_canonical(dir.path()).unwrap();
    let back = load_resource_bundle(&cfg).unwrap();
    for kind in [ResourceKind::Frequency, ResourceKind::Aoa, ResourceKind::Cefr, ResourceKind::Efllex, ResourceKind::Senses] {
        assert_eq!(data.bundle.is_present(kind), back.is_present(kind), "{kind:?}");
    }
    for w in &data.words {
        let word = w.word.as_str();
        assert_eq!(data.bundle.frequency(word).found(), back.frequency(word).found());
        assert_eq!(data.bundle.aoa(word).found(), back.aoa(word).found());
        assert_eq!(data.bundle.cefr(word).found(), back.cefr(word).found());
        assert_eq!(data.bundle.efllex(word).found(), back.efllex(word).found());
        assert_eq!(data.bundle.embedding_norm(word).found(), back.embedding_norm(word).found());
        assert_eq!(data.bundle.senses(word, Some(w.dominant_pos)).found(), back.senses(word, Some(w.dominant_pos)).found());
    }
}
