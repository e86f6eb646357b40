//! Tokenization and answer normalization.
//!
//! Both share one rule: lowercase, split on anything that is not
//! alphanumeric, drop the separators. Normalization additionally drops the
//! articles `a`, `an`, `the`. Because they share the split, normalizing the
//! surface text of any token span gives the same string as normalizing the
//! tokens themselves, which keeps span matching and EM scoring consistent.

use alloc::string::String;
use alloc::vec::Vec;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const DOT: &str = "[DOT]";
/// Literal glue word between a header and its cell value.
pub const IS: &str = "is";

/// Splits `s` into lowercase alphanumeric tokens.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn is_article(token: &str) -> bool {
    matches!(token, "a" | "an" | "the")
}

/// Sentinel tokens inserted by the linearizers. `tokenize` never emits them.
pub fn is_sentinel(token: &str) -> bool {
    token.starts_with('[') && token.ends_with(']') && token.len() > 2
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "for", "from", "has",
    "have", "he", "her", "his", "how", "in", "is", "it", "its", "of", "on", "or", "she", "that",
    "the", "their", "this", "to", "was", "were", "what", "when", "where", "which", "who", "whom",
    "whose", "why", "with",
];

/// Function words ignored by the lexical overlap features.
pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Normalized answer tokens: tokenized with articles removed.
pub fn answer_tokens(s: &str) -> Vec<String> {
    tokenize(s).into_iter().filter(|t| !is_article(t)).collect()
}

/// Lowercases, strips punctuation and articles, collapses whitespace.
pub fn normalize_answer(s: &str) -> String {
    answer_tokens(s).join(" ")
}

pub fn is_numeric(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Boston College."), vec!["boston", "college"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("2012 NFL Draft"), vec!["2012", "nfl", "draft"]);
        assert_eq!(tokenize("Ryan Andrew Quigley ( born"), vec!["ryan", "andrew", "quigley", "born"]);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_answer("The Eagles!"), "eagles");
        assert_eq!(normalize_answer("2018"), "2018");
        assert_eq!(normalize_answer("  Boston   College "), "boston college");
        assert_eq!(normalize_answer("the"), "");
        assert_eq!(normalize_answer("Lord of the Rings"), "lord of rings");
    }

    #[test]
    fn stopword_table_is_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sentinels() {
        assert!(is_sentinel(DOT) && is_sentinel(CLS) && is_sentinel(SEP));
        assert!(!is_sentinel("[]") && !is_sentinel("is"));
    }
}
