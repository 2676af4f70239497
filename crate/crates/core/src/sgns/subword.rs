//! Character n-grams of boundary-marked words, hashed into buckets.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

pub const DEFAULT_BUCKETS: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordConfig {
    pub minn: usize,
    pub maxn: usize,
    pub buckets: usize,
}

impl Default for SubwordConfig {
    fn default() -> Self {
        SubwordConfig {
            minn: 4,
            maxn: 6,
            buckets: DEFAULT_BUCKETS,
        }
    }
}

/// Character n-grams of `<word>` for n in `[minn, maxn]`, in order of start
/// position then length. The bare marked word itself is included when its
/// length falls in range.
pub fn ngrams(word: &str, minn: usize, maxn: usize) -> Vec<String> {
    let marked: Vec<char> = format!("<{word}>").chars().collect();
    let mut out = Vec::new();
    for start in 0..marked.len() {
        for n in minn..=maxn {
            if n == 0 || start + n > marked.len() {
                break;
            }
            out.push(marked[start..start + n].iter().collect());
        }
    }
    out
}

/// FNV-1a (64-bit) of the UTF-8 bytes, reduced modulo `buckets`.
pub fn bucket(ngram: &str, buckets: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(ngram.as_bytes());
    (h.finish() % buckets as u64) as usize
}

pub fn subword_ngrams(word: &str, minn: usize, maxn: usize, buckets: usize) -> Vec<usize> {
    ngrams(word, minn, maxn)
        .iter()
        .map(|g| bucket(g, buckets))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn gull_ngrams() {
        let grams: HashSet<String> = ngrams("gull", 4, 6).into_iter().collect();
        let expected: HashSet<String> = ["<gul", "gull", "ull>", "<gull", "gull>", "<gull>"]
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(grams, expected);
    }

    #[test]
    fn short_word_has_no_ngrams() {
        // "<a>" is 3 chars, shorter than minn
        assert!(ngrams("a", 4, 6).is_empty());
        assert!(subword_ngrams("a", 4, 6, 100).is_empty());
    }

    #[test]
    fn multibyte_chars_count_once() {
        assert_eq!(ngrams("ís", 4, 4), vec!["<ís>"]);
    }

    #[test]
    fn hashing_is_stable() {
        // FNV-1a 64 of "gull": offset basis 0xcbf29ce484222325, prime 0x100000001b3
        let mut h: u64 = 0xcbf29ce484222325;
        for b in "gull".bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        assert_eq!(bucket("gull", 1_000_003), (h % 1_000_003) as usize);
        assert_eq!(bucket("<gul", 2_000_000), bucket("<gul", 2_000_000));
        assert!(subword_ngrams("gull", 4, 6, 10).iter().all(|&b| b < 10));
    }
}
