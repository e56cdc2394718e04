//! Tokenization, the frozen stop-word list, and stable hashing helpers.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOP_WORDS_TXT: &str = include_str!("../data/stopwords.txt");

/// Version tag of the embedded stop-word list.
pub const STOP_WORDS_VERSION: &str = "v1";

/// The frozen stop-word list (127 English function words).
pub fn stop_words() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOP_WORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stop_word(token: &str) -> bool {
    stop_words().contains(token)
}

/// Lowercase, split on whitespace, and remove ASCII punctuation from each
/// token. Tokens that become empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.chars()
                .filter(|c| !c.is_ascii_punctuation())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Tokens of `text` that are not stop words.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stop_word(t))
        .collect()
}

/// Collapse runs of whitespace to single spaces and trim.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased, whitespace-normalized form used for concept comparison.
pub fn normalize_concept(text: &str) -> String {
    normalize_ws(&text.to_lowercase())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit mix of a run seed and a per-record key. Used to derive
/// independent per-item random streams.
pub fn hash64(seed: u64, key: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ key.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// FNV-1a over bytes; stable across platforms and runs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_list_is_frozen_at_127() {
        assert_eq!(stop_words().len(), 127);
        assert!(is_stop_word("the"));
        assert!(!is_stop_word("door"));
    }

    #[test]
    fn tokenize_strips_punctuation_and_case() {
        assert_eq!(
            tokenize("A revolving door ... at a What?"),
            vec!["a", "revolving", "door", "at", "a", "what"]
        );
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn hash64_is_stable() {
        assert_eq!(hash64(7, 3), hash64(7, 3));
        assert_ne!(hash64(7, 3), hash64(7, 4));
        assert_ne!(hash64(7, 3), hash64(8, 3));
    }
}
