//! Synthetic parallel data: sample monolingual target text and translate
//! it into the source language with a single reverse model.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{filter_pairs, tokenize, Origin, SentencePair};
use crate::decoding::{SearchMode, Translator};
use crate::error::{Error, Result};
use crate::io::{sha256_hex, write_atomic, write_lines};
use crate::rng::{derive_seed, Rng};
use crate::training::Checkpoint;

#[derive(Debug, Clone, PartialEq)]
pub struct MonoSample {
    /// Sampled lines in corpus order.
    pub lines: Vec<String>,
    /// Number of lines in the corpus.
    pub corpus_size: usize,
}

impl MonoSample {
    pub fn is_whole_corpus(&self) -> bool {
        self.lines.len() == self.corpus_size
    }
}

/// Uniform sample of `n` lines without replacement in one pass (reservoir
/// sampling). Lines come back in their original order. Asking for more
/// lines than exist returns everything.
pub fn sample_lines<I>(lines: I, n: usize, seed: u64) -> Result<MonoSample>
where
    I: IntoIterator<Item = Result<String>>,
{
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let mut rng = Rng::new(derive_seed(seed, "mono-sample"));
    let mut reservoir: Vec<(usize, String)> = Vec::with_capacity(n.min(1 << 20));
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if reservoir.len() < n {
            reservoir.push((seen, line));
        } else {
            let j = rng.below(seen + 1);
            if j < n {
                reservoir[j] = (seen, line);
            }
        }
        seen += 1;
    }
    if seen < n {
        log::warn!("requested {n} lines but the corpus has only {seen}; using all of it");
    }
    reservoir.sort_by_key(|(i, _)| *i);
    Ok(MonoSample {
        lines: reservoir.into_iter().map(|(_, l)| l).collect(),
        corpus_size: seen,
    })
}

pub fn sample_monolingual(path: &Path, n: usize, seed: u64) -> Result<MonoSample> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    sample_lines(reader.lines().map(|l| l.map_err(|e| Error::io(path, e))), n, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the reverse checkpoint.
    pub reverse_model: String,
    pub mode: SearchMode,
    pub seed: Option<u64>,
    pub sample_size: usize,
    /// SHA-256 over the target lines, newline-joined.
    pub target_sha256: String,
    /// `(line index, message)` for lines that could not be translated.
    pub failures: Vec<(usize, String)>,
}

/// Machine-translated source side paired with verbatim monolingual target
/// lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub source_lines: Vec<String>,
    pub target_lines: Vec<String>,
    pub provenance: Provenance,
}

pub fn lines_hash<S: AsRef<str>>(lines: &[S]) -> String {
    let mut bytes = Vec::new();
    for l in lines {
        bytes.extend_from_slice(l.as_ref().as_bytes());
        bytes.push(b'\n');
    }
    sha256_hex(&bytes)
}

fn model_id(reverse: &Checkpoint) -> String {
    reverse
        .info
        .sha256
        .clone()
        .unwrap_or_else(|| sha256_hex(&reverse.to_bytes()))
}

/// Translates target-language lines into the source language with one
/// reverse model. Lines that fail to decode get an empty source and are
/// listed in the provenance.
pub fn back_translate<S: AsRef<str> + Sync>(
    reverse: &Checkpoint,
    mono_lines: &[S],
    mode: SearchMode,
) -> SyntheticCorpus {
    let pre = &reverse.preprocessor;
    let translator = Translator {
        models: std::slice::from_ref(&reverse.model),
        src_vocab: &pre.src_vocab,
        tgt_vocab: &pre.tgt_vocab,
        segmenter: &pre.segmenter,
        mode,
    };
    let out = translator.translate_corpus(mono_lines);
    for (i, msg) in &out.failures {
        log::warn!("line {}: back-translation failed: {msg}", i + 1);
    }
    let target_lines: Vec<String> = mono_lines.iter().map(|l| l.as_ref().to_string()).collect();
    SyntheticCorpus {
        provenance: Provenance {
            reverse_model: model_id(reverse),
            mode,
            seed: None,
            sample_size: target_lines.len(),
            target_sha256: lines_hash(&target_lines),
            failures: out.failures,
        },
        source_lines: out.lines,
        target_lines,
    }
}

/// Back-translates the target side of an existing parallel corpus,
/// discarding its original source side.
pub fn self_synthesize(
    parallel: &[SentencePair],
    reverse: &Checkpoint,
    mode: SearchMode,
) -> SyntheticCorpus {
    let targets: Vec<String> = parallel.iter().map(|p| p.target.join(" ")).collect();
    back_translate(reverse, &targets, mode)
}

impl SyntheticCorpus {
    pub fn len(&self) -> usize {
        self.target_lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_lines.is_empty()
    }

    /// Word-level pairs tagged synthetic. With `max_ratio` set, empty and
    /// length-mismatched pairs are dropped.
    pub fn to_pairs(&self, max_ratio: Option<f64>) -> Vec<SentencePair> {
        let pairs: Vec<SentencePair> = self
            .source_lines
            .iter()
            .zip(&self.target_lines)
            .map(|(s, t)| SentencePair::new(tokenize(s), tokenize(t), Origin::Synthetic))
            .collect();
        match max_ratio {
            Some(r) => filter_pairs(&pairs, r),
            None => pairs,
        }
    }

    pub fn save(&self, source: &Path, target: &Path, provenance: &Path) -> Result<()> {
        write_lines(source, &self.source_lines)?;
        write_lines(target, &self.target_lines)?;
        write_atomic(provenance, &serde_json::to_vec_pretty(&self.provenance)?)
    }
}
