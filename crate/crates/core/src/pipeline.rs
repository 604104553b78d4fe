//! Text to id conversion shared by training, decoding and evaluation.

use crate::corpus::{filter_pairs, tokenize, Origin, SentencePair, TrainingExample, Vocabulary};
use crate::error::Result;
use crate::subword::Segmenter;

/// Segmenter plus the two network vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub segmenter: Segmenter,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
}

impl Preprocessor {
    /// Builds both vocabularies from the segmented parallel data. They stay
    /// fixed afterwards; any further data is expressed in these units.
    pub fn build(segmenter: Segmenter, pairs: &[SentencePair], vocab_size: usize) -> Result<Self> {
        let segmented: Vec<SentencePair> = pairs
            .iter()
            .map(|p| segment_pair(&segmenter, p))
            .collect();
        let src_vocab = Vocabulary::build(
            segmented.iter().map(|p| p.source.iter().map(String::as_str)),
            vocab_size,
        )?;
        let tgt_vocab = Vocabulary::build(
            segmented.iter().map(|p| p.target.iter().map(String::as_str)),
            vocab_size,
        )?;
        Ok(Preprocessor {
            segmenter,
            src_vocab,
            tgt_vocab,
        })
    }

    pub fn segment_line(&self, line: &str) -> Vec<String> {
        self.segmenter.segment(&tokenize(line))
    }

    /// Segments, filters by length ratio and encodes word-level pairs.
    /// Mono-dummy pairs keep the `<null>` source, skip the ratio filter and
    /// are placed after the others.
    pub fn prepare(&self, pairs: &[SentencePair], max_ratio: f64) -> Vec<TrainingExample> {
        let segmented: Vec<SentencePair> = pairs
            .iter()
            .map(|p| segment_pair(&self.segmenter, p))
            .collect();
        let (dummy, rest): (Vec<SentencePair>, Vec<SentencePair>) = segmented
            .into_iter()
            .partition(|p| p.origin == Origin::MonoDummy);
        filter_pairs(&rest, max_ratio)
            .iter()
            .chain(dummy.iter().filter(|p| !p.target.is_empty()))
            .map(|p| self.encode_segmented(p))
            .collect()
    }

    /// Encodes an already segmented pair.
    pub fn encode_segmented(&self, pair: &SentencePair) -> TrainingExample {
        let source = match pair.origin {
            Origin::MonoDummy => vec![Vocabulary::NULL, Vocabulary::EOS],
            _ => self.src_vocab.encode(&pair.source),
        };
        SentencePair::new(source, self.tgt_vocab.encode(&pair.target), pair.origin)
    }

    /// Target-side ids for a monolingual line.
    pub fn encode_target_line(&self, line: &str) -> Vec<u32> {
        self.tgt_vocab.encode(&self.segment_line(line))
    }

    /// Target ids back to words.
    pub fn postprocess(&self, ids: &[u32]) -> Vec<String> {
        self.segmenter.desegment(&self.tgt_vocab.decode(ids))
    }
}

fn segment_pair(segmenter: &Segmenter, p: &SentencePair) -> SentencePair {
    let source = match p.origin {
        Origin::MonoDummy => p.source.clone(),
        _ => segmenter.segment(&p.source),
    };
    SentencePair::new(source, segmenter.segment(&p.target), p.origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identity_pipeline_roundtrip() {
        let pairs = vec![SentencePair::parallel(words("x y"), words("a b c"))];
        let pre = Preprocessor::build(Segmenter::Identity, &pairs, 100).unwrap();
        let ex = pre.prepare(&pairs, 9.0);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].target.last(), Some(&Vocabulary::EOS));
        assert_eq!(pre.postprocess(&ex[0].target), words("a b c"));
    }

    #[test]
    fn mono_dummy_keeps_null_source() {
        let pairs = vec![SentencePair::parallel(words("x"), words("a"))];
        let pre = Preprocessor::build(Segmenter::Identity, &pairs, 100).unwrap();
        let mono = SentencePair::mono_dummy(words("a a a a a a a a a a a a"));
        let ex = pre.prepare(&[mono], 9.0);
        assert_eq!(ex[0].source, vec![Vocabulary::NULL, Vocabulary::EOS]);
        assert_eq!(ex[0].origin, Origin::MonoDummy);
    }
}
