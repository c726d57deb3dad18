mod support;

use std::sync::Arc;

use proptest::prelude::*;

use isni::corpus::normalize_text;
use isni::phonetics::{
    phoneme_edit_distance, similarity_of_codes, supervision_distribution, Inventory, PhoneticCode,
    PronouncingLexicon,
};
use support::oracle_distance;

fn inventory() -> Arc<Inventory> {
    PronouncingLexicon::builtin().shared_inventory()
}

fn code_strategy() -> impl Strategy<Value = PhoneticCode> {
    let inv = inventory();
    let n = inv.len();
    prop::collection::vec(0..n, 0..8).prop_map(move |idx| {
        let all: Vec<_> = inv.iter().cloned().collect();
        PhoneticCode::new(idx.into_iter().map(|i| all[i].clone()).collect())
    })
}

proptest! {
    #[test]
    fn distance_matches_oracle(a in code_strategy(), b in code_strategy()) {
        prop_assert_eq!(phoneme_edit_distance(&a, &b), oracle_distance(&a, &b));
    }

    #[test]
    fn distance_is_a_metric(a in code_strategy(), b in code_strategy(), c in code_strategy()) {
        let d = |x: &PhoneticCode, y: &PhoneticCode| phoneme_edit_distance(x, y);
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        let (la, lb) = (a.len() as f64, b.len() as f64);
        prop_assert!(d(&a, &b) >= (la - lb).abs());
        prop_assert!(d(&a, &b) <= la.max(lb));
    }

    #[test]
    fn similarity_is_bounded(a in code_strategy(), b in code_strategy()) {
        let s = similarity_of_codes(&a, &b);
        prop_assert!(s >= 0.0 && s <= a.len() as f64);
        prop_assert_eq!(similarity_of_codes(&a, &a), a.len() as f64);
    }

    #[test]
    fn normalization_is_idempotent(s in "[A-Za-z ,.!?']{0,40}") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once.clone());
        prop_assert!(!once.contains("  "));
    }
}

#[test]
fn supervision_sums_to_one_for_lexicon_words() {
    let lex = PronouncingLexicon::builtin();
    let words = lex.words();
    for w in words.iter().take(50) {
        let r = supervision_distribution(w, &words, &lex).unwrap();
        let total: f64 = r.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "{w}: {total}");
        assert!(r.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn homophones_are_at_distance_zero() {
    let lex = PronouncingLexicon::builtin();
    let d = |a: &str, b: &str| phoneme_edit_distance(&lex.g2p(a).unwrap(), &lex.g2p(b).unwrap());
    assert_eq!(d("cue", "queue"), 0.0);
    assert!(d("cue", "sue") > 0.0);
    assert!(d("cue", "sue") < d("cue", "the"));
}
