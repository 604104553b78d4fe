//! Corpus-level BLEU in the multi-bleu convention: tokenized input, clipped
//! n-gram precisions pooled over the corpus, no smoothing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub bleu: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

/// Counts n-gram matches; `stats[n-1] = (clipped matches, hypothesis n-grams)`.
fn sentence_stats<S: AsRef<str>>(hyp: &[S], reference: &[S], max_n: usize, stats: &mut [(u64, u64)]) {
    for n in 1..=max_n {
        if hyp.len() < n {
            continue;
        }
        let mut ref_counts: HashMap<Vec<&str>, u64> = HashMap::new();
        if reference.len() >= n {
            for w in reference.windows(n) {
                *ref_counts
                    .entry(w.iter().map(AsRef::as_ref).collect())
                    .or_default() += 1;
            }
        }
        let mut hyp_counts: HashMap<Vec<&str>, u64> = HashMap::new();
        for w in hyp.windows(n) {
            *hyp_counts
                .entry(w.iter().map(AsRef::as_ref).collect())
                .or_default() += 1;
        }
        let matched: u64 = hyp_counts
            .iter()
            .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        stats[n - 1].0 += matched;
        stats[n - 1].1 += (hyp.len() + 1 - n) as u64;
    }
}

/// BLEU over pre-tokenized sentences.
pub fn bleu_tokens<S: AsRef<str>>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    max_n: usize,
) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus("bleu needs at least one sentence".into()));
    }
    if max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be at least 1".into()));
    }
    let mut stats = vec![(0u64, 0u64); max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        sentence_stats(h, r, max_n, &mut stats);
    }
    let precisions: Vec<f64> = stats
        .iter()
        .map(|&(m, t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let bleu = if precisions.contains(&0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        100.0 * brevity_penalty * mean_log.exp()
    };
    Ok(BleuReport {
        bleu,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

/// BLEU over whitespace-tokenized lines. With `case_sensitive == false`
/// both sides are lowercased first.
pub fn bleu<S: AsRef<str>>(
    hypotheses: &[S],
    references: &[S],
    max_n: usize,
    case_sensitive: bool,
) -> Result<BleuReport> {
    let split = |lines: &[S]| -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| {
                let l = l.as_ref();
                let l = if case_sensitive { l.to_string() } else { l.to_lowercase() };
                l.split_whitespace().map(str::to_string).collect()
            })
            .collect()
    };
    bleu_tokens(&split(hypotheses), &split(references), max_n)
}
