//! Greedy, beam-search and ensemble decoding.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{detokenize, tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Annotations, DecoderState, ModelParams};
use crate::subword::Segmenter;

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub ids: Vec<u32>,
    /// Accumulated natural-log probability.
    pub logprob: f64,
    /// One decoder state per ensemble member.
    pub states: Vec<DecoderState>,
    pub finished: bool,
}

impl Hypothesis {
    /// Length-normalized score (`logprob / |ids|`).
    pub fn normalized_score(&self) -> f64 {
        self.logprob / self.ids.len().max(1) as f64
    }

    pub fn score(&self, length_normalize: bool) -> f64 {
        if length_normalize {
            self.normalized_score()
        } else {
            self.logprob
        }
    }

    /// Output ids without the terminating `<eos>`.
    pub fn tokens(&self) -> &[u32] {
        match self.ids.split_last() {
            Some((&Vocabulary::EOS, rest)) => rest,
            _ => &self.ids,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Greedy,
    Beam(usize),
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchMode::Greedy => f.write_str("greedy"),
            SearchMode::Beam(b) => write!(f, "beam{b}"),
        }
    }
}

/// Default output length cap for a source of `src_len` ids.
pub fn default_max_len(src_len: usize) -> usize {
    3 * src_len + 10
}

/// Encoded source shared by every hypothesis of one search.
struct Ensemble<'a> {
    models: &'a [ModelParams],
    anns: Vec<Annotations>,
}

impl<'a> Ensemble<'a> {
    fn new(models: &'a [ModelParams], src_ids: &[u32]) -> Result<Self> {
        let first = models
            .first()
            .ok_or_else(|| Error::InvalidArgument("no models to decode with".into()))?;
        if src_ids.is_empty() {
            return Err(Error::InvalidArgument("empty source sentence".into()));
        }
        for m in &models[1..] {
            let (a, b) = (m.dims(), first.dims());
            if a.tgt_vocab != b.tgt_vocab || a.src_vocab != b.src_vocab {
                return Err(Error::Dimension(
                    "ensemble members disagree on vocabulary size".into(),
                ));
            }
        }
        let anns = models
            .iter()
            .map(|m| m.encode(src_ids))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble { models, anns })
    }

    fn initial(&self) -> Hypothesis {
        Hypothesis {
            ids: Vec::new(),
            logprob: 0.0,
            states: self
                .models
                .iter()
                .zip(&self.anns)
                .map(|(m, a)| m.initial_state(a))
                .collect(),
            finished: false,
        }
    }

    /// Next states and the log of the members' mean distribution.
    fn step(&self, states: &[DecoderState]) -> (Vec<DecoderState>, Vec<f64>) {
        let mut next = Vec::with_capacity(states.len());
        let mut mean: Option<Vec<f64>> = None;
        for ((m, a), s) in self.models.iter().zip(&self.anns).zip(states) {
            let (ns, probs) = m.decode_step(s, a, None);
            next.push(ns);
            match &mut mean {
                None => mean = Some(probs),
                Some(acc) => acc.iter_mut().zip(&probs).for_each(|(x, p)| *x += p),
            }
        }
        let k = self.models.len() as f64;
        let mut logp = mean.expect("at least one model");
        if self.models.len() > 1 {
            logp.iter_mut().for_each(|p| *p /= k);
        }
        logp.iter_mut().for_each(|p| *p = p.ln());
        (next, logp)
    }
}

fn extend(h: &Hypothesis, next: &[DecoderState], tok: u32, logp: f64) -> Hypothesis {
    let mut ids = h.ids.clone();
    ids.push(tok);
    Hypothesis {
        ids,
        logprob: h.logprob + logp,
        states: next.iter().cloned().map(|s| s.with_token(tok)).collect(),
        finished: tok == Vocabulary::EOS,
    }
}

/// Picks the token with the highest probability, lowest id on ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Argmax decoding until `<eos>` or `max_len` tokens.
pub fn greedy_decode(models: &[ModelParams], src_ids: &[u32], max_len: usize) -> Result<Hypothesis> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    let ens = Ensemble::new(models, src_ids)?;
    let mut hyp = ens.initial();
    while hyp.ids.len() < max_len && !hyp.finished {
        let (next, logp) = ens.step(&hyp.states);
        let tok = argmax(&logp);
        hyp = extend(&hyp, &next, tok as u32, logp[tok]);
    }
    Ok(hyp)
}

/// Beam search over the ensemble's mean distribution.
///
/// Each step expands every live hypothesis over the whole vocabulary and
/// keeps the best `beam - finished` candidates by accumulated
/// log-probability. Hypotheses ending in `<eos>` retire; survivors at
/// `max_len` join the pool unfinished. The pool's best entry by
/// [`Hypothesis::score`] is returned.
pub fn beam_search(
    models: &[ModelParams],
    src_ids: &[u32],
    beam: usize,
    max_len: usize,
    length_normalize: bool,
) -> Result<Hypothesis> {
    if beam == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    let ens = Ensemble::new(models, src_ids)?;
    let mut live = vec![ens.initial()];
    let mut pool: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        let capacity = beam.saturating_sub(pool.len());
        if live.is_empty() || capacity == 0 {
            break;
        }
        let expanded: Vec<(Vec<DecoderState>, Vec<f64>)> =
            live.iter().map(|h| ens.step(&h.states)).collect();
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (hi, (h, (_, logp))) in live.iter().zip(&expanded).enumerate() {
            candidates.extend(
                logp.iter()
                    .enumerate()
                    .map(|(tok, lp)| (h.logprob + lp, hi, tok)),
            );
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        candidates.truncate(capacity);
        let mut next_live = Vec::with_capacity(candidates.len());
        for (_, hi, tok) in candidates {
            let (states, logp) = &expanded[hi];
            let h = extend(&live[hi], states, tok as u32, logp[tok]);
            if h.finished {
                pool.push(h);
            } else {
                next_live.push(h);
            }
        }
        live = next_live;
    }
    pool.extend(live);
    let mut best: Option<Hypothesis> = None;
    for h in pool {
        let better = match &best {
            None => true,
            Some(b) => h.score(length_normalize) > b.score(length_normalize),
        };
        if better {
            best = Some(h);
        }
    }
    Ok(best.expect("search always yields a hypothesis"))
}

/// Decodes with the given mode (length-normalized beam).
pub fn decode(models: &[ModelParams], src_ids: &[u32], mode: SearchMode, max_len: usize) -> Result<Hypothesis> {
    match mode {
        SearchMode::Greedy => greedy_decode(models, src_ids, max_len),
        SearchMode::Beam(b) => beam_search(models, src_ids, b, max_len, true),
    }
}

/// Text-in, text-out translation with a fixed model set.
#[derive(Debug, Clone, Copy)]
pub struct Translator<'a> {
    pub models: &'a [ModelParams],
    pub src_vocab: &'a Vocabulary,
    pub tgt_vocab: &'a Vocabulary,
    pub segmenter: &'a Segmenter,
    pub mode: SearchMode,
}

/// Line-aligned corpus translation result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationOutput {
    pub lines: Vec<String>,
    /// `(line index, message)` for every line replaced by an empty string.
    pub failures: Vec<(usize, String)>,
}

impl Translator<'_> {
    /// Translates pre-segmented source units into target units (still
    /// carrying boundary markers).
    pub fn translate_units<S: AsRef<str>>(&self, units: &[S]) -> Result<Vec<String>> {
        let src = self.src_vocab.encode(units);
        let hyp = decode(self.models, &src, self.mode, default_max_len(src.len()))?;
        Ok(self.tgt_vocab.decode(hyp.tokens()))
    }

    /// tokenize, segment, encode, search, desegment, detokenize.
    pub fn translate_line(&self, line: &str) -> Result<String> {
        let words = tokenize(line);
        if words.is_empty() {
            return Ok(String::new());
        }
        let units = self.segmenter.segment(&words);
        let out = self.translate_units(&units)?;
        Ok(detokenize(&self.segmenter.desegment(&out)))
    }

    /// Translates every line in parallel; output order matches input.
    pub fn translate_corpus<S: AsRef<str> + Sync>(&self, lines: &[S]) -> TranslationOutput {
        let results: Vec<Result<String>> = lines
            .par_iter()
            .map(|l| self.translate_line(l.as_ref()))
            .collect();
        let mut out = TranslationOutput {
            lines: Vec::with_capacity(lines.len()),
            failures: Vec::new(),
        };
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) => out.lines.push(s),
                Err(e) => {
                    out.failures.push((i, e.to_string()));
                    out.lines.push(String::new());
                }
            }
        }
        out
    }
}
