mod common;

use common::reference_bleu;
use lismore::corpus::ParallelExample;
use lismore::metrics::{char_bleu_corpus, char_bleu_sentence, corpus_bleu, rank_worst, transliterate_sequence, Smoothing};
use lismore::{Error, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[char], max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

fn random_pairs(seed: u64, n: usize) -> Vec<(String, String)> {
    let alphabet: Vec<char> = "abcdè ".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = random_word(&mut rng, &alphabet, 12);
            // Half the hypotheses are edits of the reference, so high-order
            // matches are common.
            let h = if rng.gen_bool(0.5) {
                let mut chars: Vec<char> = r.chars().collect();
                if !chars.is_empty() {
                    let i = rng.gen_range(0..chars.len());
                    chars[i] = alphabet[rng.gen_range(0..alphabet.len())];
                }
                chars.into_iter().collect()
            } else {
                random_word(&mut rng, &alphabet, 12)
            };
            (h, r)
        })
        .collect()
}

fn as_refs(pairs: &[(String, String)]) -> Vec<(&str, &str)> {
    pairs.iter().map(|(h, r)| (h.as_str(), r.as_str())).collect()
}

#[test]
fn corpus_bleu_matches_reference_on_random_corpora() {
    for seed in 0..20 {
        let pairs = random_pairs(seed, 100);
        let (hyps, refs): (Vec<String>, Vec<String>) = pairs.iter().cloned().unzip();
        let got = char_bleu_corpus(&hyps, &refs).unwrap().score;
        let want = reference_bleu(&as_refs(&pairs), false);
        assert!((got - want).abs() < 1e-9, "seed {seed}: {got} vs {want}");
        let smoothed = corpus_bleu(&hyps, &refs, Smoothing::AddOne).unwrap().score;
        assert!((smoothed - reference_bleu(&as_refs(&pairs), true)).abs() < 1e-9);
    }
}

#[test]
fn sentence_bleu_matches_reference_on_random_pairs() {
    for (h, r) in random_pairs(99, 100) {
        for (smoothing, smooth) in [(Smoothing::None, false), (Smoothing::AddOne, true)] {
            let got = char_bleu_sentence(&h, &r, smoothing).score;
            let want = reference_bleu(&[(&h, &r)], smooth);
            assert!((got - want).abs() < 1e-9, "{h:?}/{r:?} {smoothing:?}: {got} vs {want}");
        }
    }
}

#[test]
fn fixture_abcd_abcf() {
    let got = char_bleu_corpus(&["abcd"], &["abcf"]).unwrap().score;
    assert!((got - reference_bleu(&[("abcd", "abcf")], false)).abs() < 1e-9);
    assert_eq!(got, 0.0);
    let smoothed = char_bleu_sentence("abcd", "abcf", Smoothing::AddOne).score;
    assert!((smoothed - reference_bleu(&[("abcd", "abcf")], true)).abs() < 1e-9);
    let by_hand = 100.0 * (0.75f64 * (2.0 / 3.0) * 0.5 * 0.5).powf(0.25);
    assert!((smoothed - by_hand).abs() < 1e-9);
}

#[test]
fn short_references_get_finite_smoothed_scores() {
    let s = char_bleu_sentence("ab", "abc", Smoothing::AddOne);
    assert!(s.score.is_finite() && s.score > 0.0 && s.score < 100.0);
    assert!((s.score - reference_bleu(&[("ab", "abc")], true)).abs() < 1e-9);
    assert_eq!(char_bleu_sentence("", "abc", Smoothing::AddOne).score, 0.0);
}

#[test]
fn mismatched_lengths_rejected() {
    assert!(char_bleu_corpus(&["a", "b"], &["a"]).is_err());
}

fn word() -> impl Strategy<Value = String> {
    "[abcè ]{0,10}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_bleu_is_permutation_invariant(pairs in prop::collection::vec((word(), word()), 1..12), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let score = |p: &[(String, String)]| {
            let (h, r): (Vec<_>, Vec<_>) = p.iter().cloned().unzip();
            char_bleu_corpus(&h, &r).unwrap().score
        };
        prop_assert!((score(&pairs) - score(&shuffled)).abs() < 1e-9);
    }

    #[test]
    fn score_in_range(h in word(), r in word()) {
        for sm in [Smoothing::None, Smoothing::AddOne] {
            let s = char_bleu_sentence(&h, &r, sm).score;
            prop_assert!((0.0..=100.0 + 1e-9).contains(&s));
        }
    }

    #[test]
    fn identical_strings_score_100(h in word()) {
        prop_assert!((char_bleu_sentence(&h, &h, Smoothing::None).score - 100.0).abs() < 1e-9);
        prop_assert!((char_bleu_sentence(&h, &h, Smoothing::AddOne).score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn different_character_multisets_score_below_100(h in word(), r in word()) {
        let mut a: Vec<char> = h.chars().collect();
        let mut b: Vec<char> = r.chars().collect();
        a.sort();
        b.sort();
        prop_assume!(a != b);
        prop_assert!(char_bleu_sentence(&h, &r, Smoothing::None).score < 100.0);
        prop_assert!(char_bleu_sentence(&h, &r, Smoothing::AddOne).score < 100.0);
    }

    #[test]
    fn rank_worst_is_stable_ascending(words in prop::collection::vec(("[ab]{1,4}", "[ab]{1,4}"), 1..15), k in 0usize..15) {
        let k = k.min(words.len());
        let test: Vec<ParallelExample> = words.iter().enumerate().map(|(i, (s, t))| ParallelExample::new(s.clone(), t.clone(), i)).collect();
        // Identity "model": the output is the source itself.
        let model = |w: &str| -> Result<String> { Ok(w.to_string()) };
        let report = rank_worst(&model, &test, k).unwrap();
        prop_assert_eq!(report.rows.len(), k);
        let full = rank_worst(&model, &test, test.len()).unwrap();
        let mut expected: Vec<(f64, usize)> = test.iter().enumerate()
            .map(|(i, e)| (char_bleu_sentence(&e.source, &e.target, Smoothing::AddOne).score, i))
            .collect();
        expected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (row, (score, i)) in full.rows.iter().zip(&expected) {
            prop_assert_eq!(&row.input, &test[*i].source);
            prop_assert_eq!(&row.reference, &test[*i].target);
            prop_assert_eq!(row.score, *score);
        }
        prop_assert_eq!(&report.rows[..], &full.rows[..k]);
    }
}

#[test]
fn rank_worst_rejects_oversized_k() {
    let test = vec![ParallelExample::new("a", "b", 0)];
    let model = |w: &str| -> Result<String> { Ok(w.to_string()) };
    assert!(rank_worst(&model, &test, 2).is_err());
}

#[test]
fn sequence_transliteration_is_per_token() {
    // A model whose output contains a space still yields one output per token.
    let model = |w: &str| -> Result<String> { Ok(format!("{w} x")) };
    assert_eq!(transliterate_sequence(&model, "ab  cd e").unwrap(), "ab x cd x e x");
    assert_eq!(transliterate_sequence(&model, "").unwrap(), "");
    let long = "a".repeat(21);
    match transliterate_sequence(&model, &format!("ok {long}")) {
        Err(Error::TooLong { word, .. }) => assert_eq!(word, long),
        other => panic!("{other:?}"),
    }
}
