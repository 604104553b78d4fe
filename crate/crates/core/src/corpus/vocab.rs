use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const NULL_TOKEN: &str = "<null>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

/// Fixed token/id map. Reserved symbols occupy ids 0..3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub const NULL: u32 = 0;
    pub const EOS: u32 = 1;
    pub const UNK: u32 = 2;
    const RESERVED: [&'static str; 3] = [NULL_TOKEN, EOS_TOKEN, UNK_TOKEN];

    /// Keeps the `max_size - 3` most frequent tokens, ties broken by first
    /// occurrence.
    pub fn build<'a, I, S>(corpus: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = &'a str>,
    {
        if max_size < Self::RESERVED.len() {
            return Err(Error::InvalidArgument(format!(
                "vocabulary max_size {max_size} leaves no room for reserved symbols"
            )));
        }
        // token -> (count, first occurrence)
        let mut counts: HashMap<&'a str, (u64, usize)> = HashMap::new();
        let mut seen_any = false;
        let mut position = 0usize;
        for sentence in corpus {
            seen_any = true;
            for tok in sentence {
                if Self::RESERVED.contains(&tok) {
                    continue;
                }
                let entry = counts.entry(tok).or_insert((0, position));
                entry.0 += 1;
                position += 1;
            }
        }
        if !seen_any {
            return Err(Error::EmptyCorpus("cannot build vocabulary".into()));
        }
        let mut ranked: Vec<(&str, u64, usize)> =
            counts.into_iter().map(|(t, (c, f))| (t, c, f)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let tokens = Self::RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(
                ranked
                    .into_iter()
                    .take(max_size - Self::RESERVED.len())
                    .map(|(t, _, _)| t.to_string()),
            )
            .collect();
        Ok(Self::from_tokens_unchecked(tokens))
    }

    /// Rebuilds a vocabulary from its token list (line number = id).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[..3] != Self::RESERVED.map(String::from) {
            return Err(Error::Malformed(
                "vocabulary must start with <null>, <eos>, <unk>".into(),
            ));
        }
        let vocab = Self::from_tokens_unchecked(tokens);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::Malformed("duplicate token in vocabulary".into()));
        }
        Ok(vocab)
    }

    fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to ids and appends `<eos>`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(Self::UNK))
            .chain(std::iter::once(Self::EOS))
            .collect()
    }

    /// Inverse of [`encode`](Self::encode); stops at the first `<eos>`.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != Self::EOS)
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN).to_string())
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for t in &self.tokens {
            writeln!(out, "{t}").expect("write to vec");
        }
        crate::io::write_atomic(path, &out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let tokens = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io(path, e))?;
        Self::from_tokens(tokens)
    }
}
