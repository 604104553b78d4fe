/// Whitespace tokenization with punctuation detached from word edges.
///
/// Inner punctuation ("e.g", "don't") is left alone; leading and trailing
/// runs are split into one token per character.
pub fn tokenize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in line.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let start = chars
            .iter()
            .position(|c| !is_punct(*c))
            .unwrap_or(chars.len());
        let end = chars
            .iter()
            .rposition(|c| !is_punct(*c))
            .map_or(start, |p| p + 1);
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        out.extend(chars[end.max(start)..].iter().map(|c| c.to_string()));
    }
    out
}

/// Joins tokens with single spaces.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | '!' | '?' | ';' | ':' | '"' | '(' | ')' | '[' | ']' | '{' | '}' | '\''
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_edge_punctuation() {
        assert_eq!(
            tokenize("Hello, world! (it's \"fine\")"),
            vec!["Hello", ",", "world", "!", "(", "it's", "\"", "fine", "\"", ")"]
        );
    }

    #[test]
    fn punctuation_only_word() {
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
        assert!(tokenize("   ").is_empty());
    }
}
