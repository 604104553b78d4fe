//! Corpus ingestion, filtering, vocabularies, monolingual mixing and
//! minibatch assembly.

mod tokenize;
mod vocab;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use tokenize::{detokenize, tokenize};
pub use vocab::{Vocabulary, EOS_TOKEN, NULL_TOKEN, UNK_TOKEN};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Where a training pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Parallel,
    MonoDummy,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair<T = String> {
    pub source: Vec<T>,
    pub target: Vec<T>,
    pub origin: Origin,
}

/// An encoded pair; both sides end in `<eos>`.
pub type TrainingExample = SentencePair<u32>;

/// Token types that can stand in for an absent source sentence.
pub trait DummySource: Sized {
    fn dummy_source() -> Vec<Self>;
}

impl DummySource for String {
    fn dummy_source() -> Vec<Self> {
        vec![NULL_TOKEN.to_string()]
    }
}

impl DummySource for u32 {
    fn dummy_source() -> Vec<Self> {
        vec![Vocabulary::NULL, Vocabulary::EOS]
    }
}

impl<T> SentencePair<T> {
    pub fn new(source: Vec<T>, target: Vec<T>, origin: Origin) -> Self {
        SentencePair {
            source,
            target,
            origin,
        }
    }

    pub fn parallel(source: Vec<T>, target: Vec<T>) -> Self {
        Self::new(source, target, Origin::Parallel)
    }
}

impl<T: DummySource> SentencePair<T> {
    /// Wraps a monolingual target sentence with the `<null>` source.
    pub fn mono_dummy(target: Vec<T>) -> Self {
        Self::new(T::dummy_source(), target, Origin::MonoDummy)
    }
}

/// Drops pairs with an empty side or a token-count ratio above `max_ratio`.
pub fn filter_pairs<T: Clone>(pairs: &[SentencePair<T>], max_ratio: f64) -> Vec<SentencePair<T>> {
    pairs
        .iter()
        .filter(|p| keep_pair(p.source.len(), p.target.len(), max_ratio))
        .cloned()
        .collect()
}

pub(crate) fn keep_pair(src_len: usize, tgt_len: usize, max_ratio: f64) -> bool {
    if src_len == 0 || tgt_len == 0 {
        return false;
    }
    let (lo, hi) = (src_len.min(tgt_len) as f64, src_len.max(tgt_len) as f64);
    hi / lo <= max_ratio
}

/// Reads two line-aligned files as tokenized pairs.
pub fn read_parallel(source: &Path, target: &Path) -> Result<Vec<SentencePair>> {
    let src = crate::io::read_lines(source)?;
    let tgt = crate::io::read_lines(target)?;
    if src.len() != tgt.len() {
        return Err(Error::Malformed(format!(
            "parallel corpus not aligned: {} has {} lines, {} has {}",
            source.display(),
            src.len(),
            target.display(),
            tgt.len()
        )));
    }
    Ok(src
        .iter()
        .zip(&tgt)
        .map(|(s, t)| SentencePair::parallel(tokenize(s), tokenize(t)))
        .collect())
}

/// Parallel data plus a monolingual pool resampled every epoch.
#[derive(Debug, Clone)]
pub struct MixedDataset<T = u32> {
    pub parallel: Vec<SentencePair<T>>,
    /// Back-translated pairs, trained on exactly like `parallel`.
    pub synthetic: Vec<SentencePair<T>>,
    /// Draw at most this many synthetic pairs per epoch (without replacement).
    pub synthetic_cap: Option<usize>,
    pub mono_pool: Vec<Vec<T>>,
    /// Monolingual instances per genuine parallel instance.
    pub ratio: f64,
    pub seed: u64,
}

impl<T: Clone + DummySource> MixedDataset<T> {
    pub fn new(parallel: Vec<SentencePair<T>>, seed: u64) -> Self {
        MixedDataset {
            parallel,
            synthetic: Vec::new(),
            synthetic_cap: None,
            mono_pool: Vec::new(),
            ratio: 0.0,
            seed,
        }
    }

    pub fn mono_count(&self) -> usize {
        (self.ratio * self.parallel.len() as f64).round() as usize
    }

    pub fn epoch_len(&self) -> usize {
        let synth = self
            .synthetic_cap
            .map_or(self.synthetic.len(), |c| c.min(self.synthetic.len()));
        self.parallel.len() + synth + self.mono_count()
    }

    /// One shuffled epoch: every parallel pair once, synthetic pairs, and
    /// `round(ratio * |parallel|)` monolingual sentences drawn uniformly with
    /// replacement. Fully determined by `(seed, epoch_index)`.
    pub fn epoch_stream(&self, epoch_index: usize) -> Result<Vec<SentencePair<T>>> {
        if !(self.ratio >= 0.0) || !self.ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mono ratio must be finite and >= 0, got {}",
                self.ratio
            )));
        }
        let n_mono = self.mono_count();
        if n_mono > 0 && self.mono_pool.is_empty() {
            return Err(Error::EmptyCorpus(
                "monolingual ratio > 0 but the monolingual pool is empty".into(),
            ));
        }
        let mut rng = Rng::new(derive_seed(self.seed, &format!("epoch-{epoch_index}")));
        let mut out = Vec::with_capacity(self.epoch_len());
        out.extend(self.parallel.iter().cloned());
        match self.synthetic_cap {
            Some(cap) if cap < self.synthetic.len() => {
                let mut idx: Vec<usize> = (0..self.synthetic.len()).collect();
                rng.shuffle(&mut idx);
                let mut chosen = idx[..cap].to_vec();
                chosen.sort_unstable();
                out.extend(chosen.into_iter().map(|i| self.synthetic[i].clone()));
            }
            _ => out.extend(self.synthetic.iter().cloned()),
        }
        for _ in 0..n_mono {
            let line = &self.mono_pool[rng.below(self.mono_pool.len())];
            out.push(SentencePair::mono_dummy(line.clone()));
        }
        rng.shuffle(&mut out);
        Ok(out)
    }
}

/// A group of examples trained on in one update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch<T = u32> {
    pub examples: Vec<SentencePair<T>>,
}

impl<T> Minibatch<T> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// `Some(origin)` when every example shares it.
    pub fn origin(&self) -> Option<Origin> {
        let first = self.examples.first()?.origin;
        self.examples
            .iter()
            .all(|e| e.origin == first)
            .then_some(first)
    }

    pub fn is_mono_dummy(&self) -> bool {
        self.examples
            .first()
            .is_some_and(|e| e.origin == Origin::MonoDummy)
    }

    /// Target-side padding mask, `mask[example][position]`, padded to the
    /// longest target in the batch.
    pub fn target_mask(&self) -> Vec<Vec<bool>> {
        let max = self
            .examples
            .iter()
            .map(|e| e.target.len())
            .max()
            .unwrap_or(0);
        self.examples
            .iter()
            .map(|e| (0..max).map(|i| i < e.target.len()).collect())
            .collect()
    }
}

/// Splits a stream into minibatches, `sort_window * batch_size` examples at
/// a time. Each window is sorted by target length, mono-dummy examples are
/// batched separately from the rest, and batches are emitted in order of
/// their shortest target.
pub fn make_minibatches<T: Clone>(
    stream: &[SentencePair<T>],
    batch_size: usize,
    sort_window: usize,
) -> Vec<Minibatch<T>> {
    assert!(batch_size >= 1 && sort_window >= 1);
    let mut batches = Vec::new();
    for window in stream.chunks(batch_size * sort_window) {
        let (mut mono, mut rest): (Vec<_>, Vec<_>) = window
            .iter()
            .cloned()
            .partition(|e| e.origin == Origin::MonoDummy);
        rest.sort_by_key(|e| e.target.len());
        mono.sort_by_key(|e| e.target.len());
        let mut local: Vec<Minibatch<T>> = rest
            .chunks(batch_size)
            .chain(mono.chunks(batch_size))
            .map(|c| Minibatch {
                examples: c.to_vec(),
            })
            .collect();
        local.sort_by_key(|b| b.examples[0].target.len());
        batches.extend(local);
    }
    batches
}
