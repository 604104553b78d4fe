use std::collections::{HashMap, HashSet};

/// Splits `word` into consecutive character bigrams unless it is in `keep`.
pub fn char_bigram_segment(word: &str, keep: &HashSet<String>, marker: &str) -> Vec<String> {
    if keep.contains(word) {
        return vec![word.to_string()];
    }
    let chars: Vec<char> = word.chars().collect();
    let n_units = chars.len().div_ceil(2);
    chars
        .chunks(2)
        .enumerate()
        .map(|(i, pair)| {
            let mut unit: String = pair.iter().collect();
            if i + 1 < n_units {
                unit.push_str(marker);
            }
            unit
        })
        .collect()
}

/// The `k` most frequent tokens; ties broken by first occurrence.
pub fn most_frequent_words<'a, I>(tokens: I, k: usize) -> HashSet<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
    for (pos, tok) in tokens.into_iter().enumerate() {
        counts.entry(tok).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    ranked
        .into_iter()
        .take(k)
        .map(|(t, _)| t.to_string())
        .collect()
}
