//! Tokenization, stopwords, lexical overlap and text digests shared by the
//! linking, matching and file-keying code.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

/// Version tag of the bundled stopword list.
pub const STOPWORDS_VERSION: &str = "v1";

const STOPWORDS_RAW: &str = include_str!("../resources/stopwords_v1.txt");

fn stopword_set() -> &'static BTreeSet<&'static str> {
    static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopword_set().contains(word)
}

/// Lowercased alphanumeric tokens in order of appearance.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Distinct non-stopword tokens.
pub fn content_words(text: &str) -> BTreeSet<String> {
    tokens(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Lowercase hex SHA-256 of the exact UTF-8 bytes.
pub fn digest_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Digest key of an ordered question pair: `sha256(prev NUL follow)`.
pub fn pair_digest(prev: &str, follow: &str) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update([0u8]);
    h.update(follow.as_bytes());
    hex::encode(h.finalize())
}

/// Trimmed, case-folded lexical form used for literal comparison.
pub fn normalize_lexical(text: &str) -> String {
    text.trim().to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_list_size() {
        let n = stopword_set().len();
        assert!((45..=60).contains(&n), "{n}");
    }

    #[test]
    fn tokens_split_on_punctuation() {
        assert_eq!(
            tokens("Spider-Man: Far from Home"),
            vec!["spider", "man", "far", "from", "home"]
        );
        assert!(tokens("###").is_empty());
    }

    #[test]
    fn content_words_drop_stopwords() {
        let w = content_words("What was the next from Marvel?");
        assert_eq!(w.into_iter().collect::<Vec<_>>(), vec!["marvel", "next"]);
    }

    #[test]
    fn jaccard_basic() {
        let a = content_words("red blue");
        let b = content_words("blue green");
        assert!((jaccard(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 0.0);
    }

    #[test]
    fn pair_digest_differs_from_concatenation() {
        assert_ne!(pair_digest("ab", "c"), pair_digest("a", "bc"));
        assert_eq!(pair_digest("a", "b").len(), 64);
    }
}
