//! Oracles and fixtures shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

use btx::corpus::{SentencePair, Vocabulary};
use btx::model::{loss_and_gradients, ModelDims, ModelParams};
use btx::rng::Rng;

pub struct BleuFixture {
    pub name: &'static str,
    pub hyps: Vec<&'static str>,
    pub refs: Vec<&'static str>,
    pub max_n: usize,
    pub case_sensitive: bool,
    /// Clipped n-gram precisions as (matches, total), counted by hand.
    pub precisions: Vec<(u32, u32)>,
    pub hyp_len: u32,
    pub ref_len: u32,
}

impl BleuFixture {
    /// BLEU from the hand counts: 100 * BP * exp(mean ln p_n).
    pub fn expected(&self) -> f64 {
        if self.precisions.iter().any(|&(m, _)| m == 0) {
            return 0.0;
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        let mean = self
            .precisions
            .iter()
            .map(|&(m, t)| (m as f64 / t as f64).ln())
            .sum::<f64>()
            / self.precisions.len() as f64;
        100.0 * bp * mean.exp()
    }
}

fn fx(
    name: &'static str,
    hyps: &[&'static str],
    refs: &[&'static str],
    max_n: usize,
    precisions: &[(u32, u32)],
    hyp_len: u32,
    ref_len: u32,
) -> BleuFixture {
    BleuFixture {
        name,
        hyps: hyps.to_vec(),
        refs: refs.to_vec(),
        max_n,
        case_sensitive: true,
        precisions: precisions.to_vec(),
        hyp_len,
        ref_len,
    }
}

pub fn bleu_fixtures() -> Vec<BleuFixture> {
    let mut v = vec![
        fx("short hypothesis", &["a b c d"], &["a b c d e f g h"], 4, &[(4, 4), (3, 3), (2, 2), (1, 1)], 4, 8),
        fx("identical", &["a b c d e"], &["a b c d e"], 4, &[(5, 5), (4, 4), (3, 3), (2, 2)], 5, 5),
        fx("no 4-gram", &["a b c e"], &["a b c d"], 4, &[(3, 4), (2, 3), (1, 2), (0, 1)], 4, 4),
        fx("last word wrong", &["a b c d e"], &["a b c d f"], 4, &[(4, 5), (3, 4), (2, 3), (1, 2)], 5, 5),
        fx("unigram clipping", &["the the the the"], &["the cat"], 4, &[(1, 4), (0, 3), (0, 2), (0, 1)], 4, 2),
        fx(
            "two sentences pooled",
            &["a b c d e", "x y z w"],
            &["a b c d e", "x y z q"],
            4,
            &[(8, 9), (6, 7), (4, 5), (2, 3)],
            9,
            9,
        ),
        fx("long hypothesis", &["a b c d e f"], &["a b c d e"], 4, &[(5, 6), (4, 5), (3, 4), (2, 3)], 6, 5),
        fx("unigram only", &["a b x"], &["a b c d"], 1, &[(2, 3)], 3, 4),
        fx("bigram clipping", &["a b a b"], &["a b a c"], 2, &[(3, 4), (2, 3)], 4, 4),
        fx(
            "empty hypothesis line",
            &["", "a b c d"],
            &["a b", "a b c d"],
            4,
            &[(4, 4), (3, 3), (2, 2), (1, 1)],
            4,
            6,
        ),
        fx("repeated token", &["a a a a a"], &["a a b a a"], 2, &[(4, 5), (2, 4)], 5, 5),
        fx(
            "case sensitive",
            &["The Cat sat on mat"],
            &["the cat sat on the mat"],
            4,
            &[(3, 5), (1, 4), (0, 3), (0, 2)],
            5,
            6,
        ),
        fx(
            "three sentences",
            &["a b c", "d e f", "h i j k"],
            &["a b c", "d e g", "h i j k"],
            4,
            &[(9, 10), (6, 7), (3, 4), (1, 1)],
            10,
            10,
        ),
        fx("reversed order", &["d c b a"], &["a b c d"], 4, &[(4, 4), (0, 3), (0, 2), (0, 1)], 4, 4),
        fx(
            "half matching tail",
            &["a b c d e f g h"],
            &["a b c d"],
            4,
            &[(4, 8), (3, 7), (2, 6), (1, 5)],
            8,
            4,
        ),
        fx(
            "sentence order swapped",
            &["x y z w", "a b c d e"],
            &["x y z q", "a b c d e"],
            4,
            &[(8, 9), (6, 7), (4, 5), (2, 3)],
            9,
            9,
        ),
        fx("single token", &["a"], &["a"], 4, &[(1, 1), (0, 0), (0, 0), (0, 0)], 1, 1),
        fx(
            "unicode trigram",
            &["über straße ja nein gut"],
            &["über straße ja nein schlecht"],
            3,
            &[(4, 5), (3, 4), (2, 3)],
            5,
            5,
        ),
        fx(
            "brevity over corpus",
            &["a b c", "d e f g"],
            &["a b c x", "d e f g y"],
            2,
            &[(7, 7), (5, 5)],
            7,
            9,
        ),
    ];
    let mut ci = fx(
        "case insensitive",
        &["The Cat sat on mat"],
        &["the cat sat on the mat"],
        4,
        &[(5, 5), (3, 4), (2, 3), (1, 2)],
        5,
        6,
    );
    ci.case_sensitive = false;
    v.push(ci);
    v
}

/// Word frequencies with a merge sequence traced by hand. Ties go to the
/// lexicographically smallest pair; `</w>` ends every word.
pub fn bpe_toy_table() -> Vec<(&'static str, u64)> {
    vec![("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)]
}

pub fn bpe_toy_merges() -> Vec<(&'static str, &'static str)> {
    vec![
        ("e", "s"),
        ("es", "t"),
        ("est", "</w>"),
        ("l", "o"),
        ("lo", "w"),
        ("e", "w"),
        ("ew", "est</w>"),
        ("n", "ewest</w>"),
        ("low", "</w>"),
        ("d", "est</w>"),
        ("i", "dest</w>"),
        ("w", "idest</w>"),
        ("e", "r"),
        ("er", "</w>"),
        ("low", "er</w>"),
    ]
}

pub fn small_model(seed: u64, hidden: usize, src_vocab: usize, tgt_vocab: usize, init: f64) -> ModelParams {
    let mut rng = Rng::new(seed);
    let dims = ModelDims {
        embed: 1 + rng.below(4),
        hidden,
        attention: 1 + rng.below(4),
        output: 1 + rng.below(4),
        src_vocab,
        tgt_vocab,
    };
    ModelParams::new(dims, init, &mut rng).unwrap()
}

/// A random source/target pair; the target ends in `<eos>`.
pub fn random_pair(rng: &mut Rng, src_vocab: usize, tgt_vocab: usize, max_len: usize) -> SentencePair<u32> {
    let ns = 1 + rng.below(max_len);
    let nt = rng.below(max_len);
    let source = (0..ns).map(|_| rng.below(src_vocab) as u32).collect();
    let mut target: Vec<u32> = (0..nt).map(|_| rng.below(tgt_vocab) as u32).collect();
    target.push(Vocabulary::EOS);
    SentencePair::parallel(source, target)
}

/// Worst relative error between backprop and central differences
/// (h = 1e-5) over every parameter entry. Denominators are floored at 1e-5,
/// where the difference quotient is dominated by roundoff.
pub fn max_gradient_error(model: &ModelParams, pairs: &[SentencePair<u32>]) -> f64 {
    let loss = |m: &ModelParams| -> f64 { pairs.iter().map(|p| m.sequence_nll(p, None).unwrap().0).sum() };
    let mut grads = model.zero_grads();
    for p in pairs {
        loss_and_gradients(model, p, None, 1.0, &mut grads).unwrap();
    }
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for k in 0..grads.len() {
        for i in 0..grads[k].len() {
            let orig = model.params()[k].value.data()[i];
            probe.params_mut()[k].value.data_mut()[i] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[k].value.data_mut()[i] = orig - h;
            let down = loss(&probe);
            probe.params_mut()[k].value.data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grads[k].data()[i];
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-5));
        }
    }
    worst
}

/// Exhaustive search over every output of at most `max_len` tokens: those
/// ending in `<eos>` and the unfinished ones of length `max_len`. Returns
/// the best `(ids, logprob)` under the given scoring; ties keep the first
/// sequence in lexicographic order.
pub fn exhaustive_best(
    model: &ModelParams,
    src: &[u32],
    max_len: usize,
    length_normalize: bool,
) -> (Vec<u32>, f64) {
    let ann = model.encode(src).unwrap();
    let vocab = model.dims().tgt_vocab;
    let mut best: Option<(Vec<u32>, f64, f64)> = None;
    let mut stack = vec![(Vec::<u32>::new(), 0.0f64, model.initial_state(&ann))];
    let mut leaves = Vec::new();
    while let Some((ids, lp, state)) = stack.pop() {
        let (next, probs) = model.decode_step(&state, &ann, None);
        for tok in 0..vocab as u32 {
            let mut ids2 = ids.clone();
            ids2.push(tok);
            let lp2 = lp + probs[tok as usize].ln();
            if tok == Vocabulary::EOS || ids2.len() == max_len {
                leaves.push((ids2, lp2));
            } else {
                stack.push((ids2, lp2, next.clone().with_token(tok)));
            }
        }
    }
    leaves.sort_by(|a, b| a.0.cmp(&b.0));
    for (ids, lp) in leaves {
        let score = if length_normalize { lp / ids.len() as f64 } else { lp };
        if best.as_ref().is_none_or(|b| score > b.2) {
            best = Some((ids, lp, score));
        }
    }
    let (ids, lp, _) = best.unwrap();
    (ids, lp)
}
