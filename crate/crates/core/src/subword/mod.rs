//! Subword segmentation: learned BPE merges and the character-bigram
//! fallback. Both mark every unit except a word's last with a suffix marker.

mod bigram;
mod bpe;

pub use bigram::{char_bigram_segment, most_frequent_words};
pub use bpe::{BpeModel, END_OF_WORD};

use std::collections::HashSet;

use crate::error::{Error, Result};

pub const DEFAULT_MARKER: &str = "@@";

/// Inverse of segmentation for a single word.
pub fn bpe_decode<S: AsRef<str>>(units: &[S], marker: &str) -> Result<String> {
    let mut word = String::new();
    let n = units.len();
    for (i, unit) in units.iter().enumerate() {
        let unit = unit.as_ref();
        match (unit.strip_suffix(marker), i + 1 == n) {
            (Some(_), true) => {
                return Err(Error::Malformed(format!(
                    "final unit {unit:?} carries the boundary marker"
                )))
            }
            (Some(stem), false) => word.push_str(stem),
            (None, true) => word.push_str(unit),
            (None, false) => {
                return Err(Error::Malformed(format!(
                    "non-final unit {unit:?} lacks the boundary marker"
                )))
            }
        }
    }
    Ok(word)
}

/// Groups a unit sequence into words: `(word, unit_count)` pairs. Errors if
/// the sequence ends inside a word.
pub fn group_units<S: AsRef<str>>(units: &[S], marker: &str) -> Result<Vec<(String, usize)>> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut count = 0;
    for unit in units {
        let unit = unit.as_ref();
        count += 1;
        match unit.strip_suffix(marker) {
            Some(stem) => current.push_str(stem),
            None => {
                current.push_str(unit);
                words.push((std::mem::take(&mut current), count));
                count = 0;
            }
        }
    }
    if count > 0 {
        return Err(Error::Malformed(
            "unit sequence ends with a marked unit".into(),
        ));
    }
    Ok(words)
}

/// Joins units into words, closing a dangling marked unit instead of
/// failing. Used on model output, which may stop mid-word.
pub fn desegment_lenient<S: AsRef<str>>(units: &[S], marker: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut open = false;
    for unit in units {
        let unit = unit.as_ref();
        match unit.strip_suffix(marker) {
            Some(stem) => {
                current.push_str(stem);
                open = true;
            }
            None => {
                current.push_str(unit);
                words.push(std::mem::take(&mut current));
                open = false;
            }
        }
    }
    if open {
        words.push(current);
    }
    words
}

/// A configured word segmenter applied token by token.
#[derive(Debug, Clone, PartialEq)]
pub enum Segmenter {
    /// Words pass through unchanged.
    Identity,
    Bpe(BpeModel),
    Bigram { keep: HashSet<String>, marker: String },
}

impl Segmenter {
    pub fn marker(&self) -> &str {
        match self {
            Segmenter::Identity => DEFAULT_MARKER,
            Segmenter::Bpe(m) => m.marker(),
            Segmenter::Bigram { marker, .. } => marker,
        }
    }

    pub fn segment_word(&self, word: &str) -> Vec<String> {
        match self {
            Segmenter::Identity => vec![word.to_string()],
            Segmenter::Bpe(m) => m.apply(word),
            Segmenter::Bigram { keep, marker } => char_bigram_segment(word, keep, marker),
        }
    }

    pub fn segment<S: AsRef<str>>(&self, words: &[S]) -> Vec<String> {
        words
            .iter()
            .filter(|w| !w.as_ref().is_empty())
            .flat_map(|w| self.segment_word(w.as_ref()))
            .collect()
    }

    pub fn desegment<S: AsRef<str>>(&self, units: &[S]) -> Vec<String> {
        match self {
            Segmenter::Identity => units.iter().map(|u| u.as_ref().to_string()).collect(),
            _ => desegment_lenient(units, self.marker()),
        }
    }

    /// JSON description, stored alongside model parameters.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Segmenter::Identity => serde_json::json!({ "kind": "identity" }),
            Segmenter::Bpe(m) => serde_json::json!({ "kind": "bpe", "model": m.to_text() }),
            Segmenter::Bigram { keep, marker } => {
                let mut keep: Vec<&String> = keep.iter().collect();
                keep.sort();
                serde_json::json!({ "kind": "bigram", "keep": keep, "marker": marker })
            }
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let bad = || Error::Malformed(format!("bad segmenter description: {value}"));
        match value.get("kind").and_then(|k| k.as_str()) {
            Some("identity") => Ok(Segmenter::Identity),
            Some("bpe") => {
                let text = value.get("model").and_then(|m| m.as_str()).ok_or_else(bad)?;
                Ok(Segmenter::Bpe(BpeModel::from_text(text)?))
            }
            Some("bigram") => {
                let keep = value
                    .get("keep")
                    .and_then(|k| k.as_array())
                    .ok_or_else(bad)?
                    .iter()
                    .map(|w| w.as_str().map(str::to_string).ok_or_else(bad))
                    .collect::<Result<HashSet<String>>>()?;
                let marker = value.get("marker").and_then(|m| m.as_str()).ok_or_else(bad)?;
                Ok(Segmenter::Bigram {
                    keep,
                    marker: marker.to_string(),
                })
            }
            _ => Err(bad()),
        }
    }
}
