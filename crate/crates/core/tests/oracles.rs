mod common;

use std::collections::BTreeMap;

use btx::decoding::{beam_search, greedy_decode};
use btx::eval::bleu;
use btx::rng::Rng;
use btx::subword::BpeModel;
use common::*;

#[test]
fn bleu_matches_hand_counts() {
    let fixtures = bleu_fixtures();
    assert_eq!(fixtures.len(), 20);
    for f in &fixtures {
        let r = bleu(&f.hyps, &f.refs, f.max_n, f.case_sensitive).unwrap();
        assert!(
            (r.bleu - f.expected()).abs() < 1e-4,
            "{}: got {} want {}",
            f.name,
            r.bleu,
            f.expected()
        );
        assert_eq!((r.hyp_len as u32, r.ref_len as u32), (f.hyp_len, f.ref_len), "{}", f.name);
        for (p, &(m, t)) in r.precisions.iter().zip(&f.precisions) {
            let want = if t == 0 { 0.0 } else { m as f64 / t as f64 };
            assert!((p - want).abs() < 1e-12, "{}", f.name);
        }
    }
}

#[test]
fn bleu_brevity_case_value() {
    let r = bleu(&["a b c d"], &["a b c d e f g h"], 4, true).unwrap();
    assert!((r.bleu - 36.7879).abs() < 1e-4);
}

#[test]
fn bpe_reproduces_traced_merges() {
    let table: BTreeMap<String, u64> = bpe_toy_table().into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    let model = BpeModel::learn(&table, 100, "@@").unwrap();
    let got: Vec<(&str, &str)> = model.merges().iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    assert_eq!(got, bpe_toy_merges());
    assert_eq!(model.apply("lowest"), ["low@@", "est"]);
}

#[test]
fn gradients_match_finite_differences_on_random_models() {
    let mut rng = Rng::new(2024);
    for case in 0..5 {
        let hidden = 1 + rng.below(8);
        let (sv, tv) = (4 + rng.below(9), 4 + rng.below(9));
        let m = small_model(100 + case, hidden, sv, tv, 0.5);
        let pairs: Vec<_> = (0..2).map(|_| random_pair(&mut rng, sv, tv, 5)).collect();
        let err = max_gradient_error(&m, &pairs);
        assert!(err < 1e-4, "case {case}: relative error {err}");
    }
}

#[test]
fn full_width_beam_equals_exhaustive_search() {
    let mut rng = Rng::new(7);
    for case in 0..10 {
        let vocab = 3 + rng.below(3);
        let max_len = 1 + rng.below(4);
        let m = small_model(500 + case, 1 + rng.below(6), 6, vocab, 1.5);
        let src: Vec<u32> = (0..1 + rng.below(4)).map(|_| rng.below(6) as u32).collect();
        let beam = vocab.pow(max_len as u32);
        for norm in [false, true] {
            let (ids, lp) = exhaustive_best(&m, &src, max_len, norm);
            let h = beam_search(std::slice::from_ref(&m), &src, beam, max_len, norm).unwrap();
            assert_eq!(h.ids, ids, "case {case} normalize {norm}");
            assert!((h.logprob - lp).abs() < 1e-9);
        }
    }
}

#[test]
fn beam_one_equals_greedy() {
    let mut rng = Rng::new(8);
    for case in 0..20 {
        let vocab = 3 + rng.below(6);
        let m = small_model(900 + case, 1 + rng.below(6), 7, vocab, 1.0);
        let src: Vec<u32> = (0..1 + rng.below(5)).map(|_| rng.below(7) as u32).collect();
        let g = greedy_decode(std::slice::from_ref(&m), &src, 8).unwrap();
        let b = beam_search(&[m], &src, 1, 8, true).unwrap();
        assert_eq!(g.ids, b.ids);
        assert_eq!(g.logprob, b.logprob);
    }
}

#[test]
fn wider_beams_never_score_worse() {
    let mut rng = Rng::new(11);
    for case in 0..200 {
        let vocab = 3 + rng.below(3);
        let max_len = 1 + rng.below(4);
        let m = vec![small_model(3000 + case, 1 + rng.below(6), 6, vocab, 2.0)];
        let src: Vec<u32> = (0..1 + rng.below(4)).map(|_| rng.below(6) as u32).collect();
        for norm in [false, true] {
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=vocab.pow(max_len as u32).min(16) {
                let s = beam_search(&m, &src, k, max_len, norm).unwrap().score(norm);
                assert!(s >= prev - 1e-12, "case {case} beam {k}: {s} < {prev}");
                prev = s;
            }
        }
    }
}
