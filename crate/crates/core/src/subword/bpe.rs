use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Sentinel appended to every word during learning and application.
pub const END_OF_WORD: &str = "</w>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    marker: String,
}

impl BpeModel {
    pub fn new(merges: Vec<(String, String)>, marker: impl Into<String>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, pair) in merges.iter().enumerate() {
            if ranks.insert(pair.clone(), rank).is_some() {
                return Err(Error::Malformed(format!(
                    "duplicate merge {} {}",
                    pair.0, pair.1
                )));
            }
        }
        let marker = marker.into();
        if marker.is_empty() || marker.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad marker {marker:?}")));
        }
        Ok(BpeModel {
            merges,
            ranks,
            marker,
        })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// Learns up to `num_merges` merges from a word frequency table.
    ///
    /// Each step merges the adjacent symbol pair with the highest
    /// count-weighted frequency, ties going to the lexicographically smallest
    /// `(left, right)`. Learning stops early once no pair occurs twice.
    pub fn learn(word_freqs: &BTreeMap<String, u64>, num_merges: usize, marker: &str) -> Result<Self> {
        if word_freqs.is_empty() {
            return Err(Error::EmptyCorpus("bpe learning needs at least one word".into()));
        }
        let mut words: Vec<(Vec<String>, u64)> = word_freqs
            .iter()
            .filter(|(w, _)| !w.is_empty())
            .map(|(w, &c)| (initial_symbols(w), c))
            .collect();
        let mut pair_counts: HashMap<(String, String), u64> = HashMap::new();
        for (syms, c) in &words {
            for p in syms.windows(2) {
                *pair_counts.entry((p[0].clone(), p[1].clone())).or_default() += c;
            }
        }
        let mut merges = Vec::with_capacity(num_merges.min(1 << 16));
        while merges.len() < num_merges {
            let best = pair_counts
                .iter()
                .filter(|(_, &c)| c > 0)
                .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
            let Some((pair, &count)) = best else { break };
            if count < 2 {
                break;
            }
            let pair = pair.clone();
            let merged = format!("{}{}", pair.0, pair.1);
            for (syms, c) in words.iter_mut() {
                if !syms.windows(2).any(|w| w[0] == pair.0 && w[1] == pair.1) {
                    continue;
                }
                for p in syms.windows(2) {
                    let e = pair_counts
                        .get_mut(&(p[0].clone(), p[1].clone()))
                        .expect("counted pair");
                    *e -= *c;
                }
                *syms = merge_pair(syms, &pair.0, &pair.1, &merged);
                for p in syms.windows(2) {
                    *pair_counts.entry((p[0].clone(), p[1].clone())).or_default() += *c;
                }
            }
            pair_counts.retain(|_, c| *c > 0);
            merges.push(pair);
        }
        Self::new(merges, marker)
    }

    /// Internal symbols of `word` after replaying the merges, including the
    /// end-of-word sentinel (alone or fused into the last symbol).
    pub fn segment_symbols(&self, word: &str) -> Vec<String> {
        let mut syms = initial_symbols(word);
        // Lowest-rank pair first; a merge only creates pairs of higher rank,
        // so this equals replaying the merge list in order.
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min();
            let Some(&rank) = best else { break };
            let (l, r) = &self.merges[rank];
            let merged = format!("{l}{r}");
            syms = merge_pair(&syms, l, r, &merged);
        }
        syms
    }

    /// Segments a word into marked units.
    pub fn apply(&self, word: &str) -> Vec<String> {
        let mut syms = self.segment_symbols(word);
        match syms.last().map(String::as_str) {
            Some(END_OF_WORD) => {
                syms.pop();
            }
            Some(last) => {
                let stem = last.strip_suffix(END_OF_WORD).unwrap_or(last).to_string();
                *syms.last_mut().expect("nonempty") = stem;
            }
            None => {}
        }
        let n = syms.len();
        for s in syms.iter_mut().take(n.saturating_sub(1)) {
            s.push_str(&self.marker);
        }
        syms
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#version 1 marker={}\n", self.marker);
        for (l, r) in &self.merges {
            writeln!(out, "{l} {r}").expect("write to string");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Malformed("empty bpe model file".into()))?;
        let marker = header
            .strip_prefix("#version 1 marker=")
            .ok_or_else(|| Error::Malformed(format!("bad bpe header {header:?}")))?;
        let merges = lines
            .enumerate()
            .map(|(i, line)| {
                let mut parts = line.split(' ');
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                        Ok((l.to_string(), r.to_string()))
                    }
                    _ => Err(Error::Malformed(format!(
                        "bad merge on line {}: {line:?}",
                        i + 2
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(merges, marker)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    word.chars()
        .map(String::from)
        .chain(std::iter::once(END_OF_WORD.to_string()))
        .collect()
}

fn merge_pair(syms: &[String], left: &str, right: &str, merged: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
            out.push(merged.to_string());
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}
