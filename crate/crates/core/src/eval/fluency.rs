use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::Result;
use crate::rng::Rng;
use crate::subword::group_units;

/// Novel multi-unit words in system output and how many of them occur in
/// non-parallel data. Counts are over word types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluencyReport {
    pub produced: usize,
    pub attested_count: usize,
    /// `attested_count / produced`, 0 when nothing was produced.
    pub attested: f64,
    /// All novel words, sorted.
    pub novel: Vec<String>,
    /// Random sample of unattested words for manual annotation.
    pub sample: Vec<String>,
}

/// Analyses segmented system output (units separated by spaces, marker
/// still attached). A word counts as produced when it spans at least two
/// units and its surface form is not in `parallel_vocab`; it is attested
/// when it occurs in `mono_vocab` or in a reference line. Matching is
/// case-sensitive.
pub fn fluency_analysis<S: AsRef<str>, R: AsRef<str>>(
    output_lines: &[S],
    marker: &str,
    parallel_vocab: &HashSet<String>,
    mono_vocab: &HashSet<String>,
    reference_lines: &[R],
    rng: &mut Rng,
    sample_n: usize,
) -> Result<FluencyReport> {
    let mut novel = BTreeSet::new();
    for line in output_lines {
        let units: Vec<&str> = line.as_ref().split_whitespace().collect();
        for (word, n) in group_units(&units, marker)? {
            if n >= 2 && !parallel_vocab.contains(&word) {
                novel.insert(word);
            }
        }
    }
    let reference: HashSet<String> = reference_lines
        .iter()
        .flat_map(|l| tokenize(l.as_ref()))
        .collect();
    let (attested, mut unattested): (Vec<&String>, Vec<&String>) = novel
        .iter()
        .partition(|w| mono_vocab.contains(*w) || reference.contains(*w));
    rng.shuffle(&mut unattested);
    unattested.truncate(sample_n);
    let produced = novel.len();
    Ok(FluencyReport {
        produced,
        attested_count: attested.len(),
        attested: if produced == 0 {
            0.0
        } else {
            attested.len() as f64 / produced as f64
        },
        sample: unattested.into_iter().cloned().collect(),
        novel: novel.into_iter().collect(),
    })
}

/// Annotation sheet pooled over several systems with the system names
/// hidden; `key[i]` names the system behind `words[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindedSample {
    pub words: Vec<String>,
    pub key: Vec<String>,
}

pub fn blind_samples(systems: &[(String, FluencyReport)], rng: &mut Rng) -> BlindedSample {
    let mut pooled: Vec<(String, String)> = systems
        .iter()
        .flat_map(|(name, r)| r.sample.iter().map(move |w| (w.clone(), name.clone())))
        .collect();
    rng.shuffle(&mut pooled);
    let (words, key) = pooled.into_iter().unzip();
    BlindedSample { words, key }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn single_unit_words_are_not_produced() {
        let r = fluency_analysis(
            &["the house is red"],
            "@@",
            &set(&["the", "house", "is", "red"]),
            &set(&[]),
            &["the house"],
            &mut Rng::new(1),
            100,
        )
        .unwrap();
        assert_eq!(r.produced, 0);
        assert_eq!(r.attested, 0.0);
    }

    #[test]
    fn three_of_five_attested() {
        let out = [
            "lit@@ er@@ atur@@ klassen und haus@@ tür",
            "ast@@ best@@ atten neben see@@ blick und berg@@ hütte",
            "haus@@ tür und see",
            "haus",
        ];
        let parallel = set(&["und", "neben", "haus"]);
        let mono = set(&["literaturklassen", "seeblick"]);
        let reference = ["die haustür ist offen"];
        let r = fluency_analysis(&out, "@@", &parallel, &mono, &reference, &mut Rng::new(2), 100)
            .unwrap();
        assert_eq!(r.produced, 5);
        assert!((r.attested - 0.6).abs() < 1e-12);
        let mut sample = r.sample.clone();
        sample.sort();
        assert_eq!(sample, vec!["astbestatten", "berghütte"]);
    }

    #[test]
    fn in_vocabulary_compounds_are_not_novel() {
        let r = fluency_analysis(
            &["haus@@ tür"],
            "@@",
            &set(&["haustür"]),
            &set(&[]),
            &[""],
            &mut Rng::new(3),
            10,
        )
        .unwrap();
        assert_eq!(r.produced, 0);
    }

    #[test]
    fn dangling_marker_is_an_error() {
        let r = fluency_analysis(
            &["haus@@"],
            "@@",
            &set(&[]),
            &set(&[]),
            &[""],
            &mut Rng::new(3),
            10,
        );
        assert!(r.is_err());
    }

    #[test]
    fn sample_is_capped() {
        let out: Vec<String> = (0..30).map(|i| format!("w@@ {i}")).collect();
        let r = fluency_analysis(&out, "@@", &set(&[]), &set(&[]), &[""], &mut Rng::new(4), 7)
            .unwrap();
        assert_eq!(r.produced, 30);
        assert_eq!(r.sample.len(), 7);
    }

    #[test]
    fn blinding_keeps_word_system_pairs() {
        let mk = |words: &[&str]| FluencyReport {
            produced: words.len(),
            attested_count: 0,
            attested: 0.0,
            novel: vec![],
            sample: words.iter().map(|w| w.to_string()).collect(),
        };
        let systems = vec![("a".to_string(), mk(&["x", "y"])), ("b".to_string(), mk(&["z"]))];
        let s = blind_samples(&systems, &mut Rng::new(5));
        assert_eq!(s.words.len(), 3);
        for (w, k) in s.words.iter().zip(&s.key) {
            let expected = if w == "z" { "b" } else { "a" };
            assert_eq!(k, expected);
        }
    }
}
