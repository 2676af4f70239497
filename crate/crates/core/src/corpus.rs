//! Metadata ingestion: JSON-lines photo records, text normalization and the
//! frequency-filtered vocabulary.
//!
//! Each input line describes one photo:
//!
//! ```text
//! {"concept": "ivory gull", "user": "u123", "title": "Ivory Gull", "tags": ["gull", "arctic"]}
//! ```
//!
//! Title and tag tokens of one photo are pooled into a single deduplicated
//! token set (a [`MetadataPiece`]); pieces are grouped per concept.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use fnv::FnvHashMap;
use log::warn;
use rayon::prelude::*;
use serde::Deserialize;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Default piece cap per concept.
pub const DEFAULT_PIECE_CAP: usize = 5000;

/// Small built-in English stop list, used when no list is supplied.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

/// One photo's textual record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetadataPiece {
    pub concept_id: String,
    pub user_id: String,
    pub tokens: Vec<String>,
}

/// All retained pieces of one concept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptCollection {
    pub concept_id: String,
    pub pieces: Vec<MetadataPiece>,
}

impl ConceptCollection {
    pub fn new(concept_id: impl Into<String>) -> Self {
        ConceptCollection {
            concept_id: concept_id.into(),
            pieces: Vec::new(),
        }
    }
}

/// Stop-word set. Entries are stored normalized (NFC, lowercase).
#[derive(Clone, Debug, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn empty() -> Self {
        StopWords(HashSet::new())
    }

    pub fn english() -> Self {
        Self::from_words(DEFAULT_STOPWORDS.iter().copied())
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWords(
            words
                .into_iter()
                .map(|w| normalize_text(w.as_ref().trim()))
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// Reads a stop-word file: one word per line, UTF-8.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_words(text.lines()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn normalize_text(s: &str) -> String {
    s.nfc().collect::<String>().to_lowercase()
}

fn is_pure_digits(token: &str) -> bool {
    token.chars().all(char::is_numeric)
}

/// Normalizes a photo's title and tags into a deduplicated token list.
///
/// Titles are split on anything that is not alphanumeric. Tags are single
/// tokens: concatenated tags such as `ivorygull` stay whole, and internal
/// whitespace in a multi-word tag is removed. Stop words and pure-digit tokens
/// are dropped; duplicates keep their first position.
pub fn tokenize(title: &str, tags: &[String], stopwords: &StopWords) -> Vec<String> {
    let title = normalize_text(title);
    let title_tokens = title
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned);
    let tag_tokens = tags.iter().map(|tag| {
        normalize_text(tag)
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
    });

    let mut seen = HashSet::new();
    title_tokens
        .chain(tag_tokens)
        .filter(|t| !t.is_empty() && !is_pure_digits(t) && !stopwords.contains(t))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

#[derive(Deserialize)]
struct RawRecord {
    concept: String,
    user: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    tags: Vec<String>,
}

/// Outcome of reading a metadata file.
#[derive(Clone, Debug, Default)]
pub struct MetadataLoad {
    pub collections: Vec<ConceptCollection>,
    /// Lines that failed to parse or lacked a required key.
    pub malformed_lines: usize,
    /// Pieces with no token left after filtering.
    pub empty_pieces: usize,
    /// Pieces beyond the per-concept cap.
    pub truncated_pieces: usize,
}

impl MetadataLoad {
    pub fn piece_count(&self) -> usize {
        self.collections.iter().map(|c| c.pieces.len()).sum()
    }
}

/// Reads a JSON-lines metadata file and groups pieces by concept.
///
/// Concepts appear in order of first occurrence; each concept keeps its first
/// `cap` non-empty pieces in file order.
pub fn load_metadata(
    path: impl AsRef<Path>,
    cap: usize,
    stopwords: &StopWords,
) -> Result<MetadataLoad> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_metadata(BufReader::new(file), cap, stopwords)
}

/// Same as [`load_metadata`] over any buffered reader.
pub fn read_metadata<R: BufRead>(
    reader: R,
    cap: usize,
    stopwords: &StopWords,
) -> Result<MetadataLoad> {
    if cap == 0 {
        return Err(Error::invalid("piece cap must be positive"));
    }

    let mut load = MetadataLoad::default();
    let mut by_concept: HashMap<String, usize> = HashMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                warn!("line {}: skipping malformed record: {}", lineno + 1, e);
                load.malformed_lines += 1;
                continue;
            }
        };

        let tokens = tokenize(&record.title, &record.tags, stopwords);
        if tokens.is_empty() {
            load.empty_pieces += 1;
            continue;
        }

        let slot = *by_concept
            .entry(record.concept.clone())
            .or_insert_with(|| {
                load.collections
                    .push(ConceptCollection::new(record.concept.clone()));
                load.collections.len() - 1
            });
        let collection = &mut load.collections[slot];
        if collection.pieces.len() >= cap {
            load.truncated_pieces += 1;
            continue;
        }
        collection.pieces.push(MetadataPiece {
            concept_id: record.concept,
            user_id: record.user,
            tokens,
        });
    }

    Ok(load)
}

/// Word/index map with occurrence counts.
///
/// Words are ordered by descending count, ties broken lexicographically, so
/// index 0 is the most frequent word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit (word, count) entries, applying the
    /// canonical ordering. Duplicate words are summed.
    pub fn from_counts<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (word, count) in entries {
            *merged.entry(word.into()).or_default() += count;
        }
        let mut entries: Vec<(String, u64)> = merged.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i as u32))
            .collect();
        let (words, counts) = entries.into_iter().unzip();
        Vocabulary {
            words,
            counts,
            index,
        }
    }

    /// Vocabulary with the given word order kept verbatim.
    pub fn from_ordered(words: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::shape("word and count lists differ in length"));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: u32) -> &str {
        &self.words[idx as usize]
    }

    pub fn count(&self, idx: u32) -> u64 {
        self.counts[idx as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Same words and indices, different counts.
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != self.words.len() {
            return Err(Error::shape(format!(
                "expected {} counts, got {}",
                self.words.len(),
                counts.len()
            )));
        }
        Ok(Vocabulary {
            words: self.words.clone(),
            counts,
            index: self.index.clone(),
        })
    }

    /// Writes `word<TAB>count` lines in index order.
    pub fn write_tsv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(w, "{word}\t{count}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Vocabulary::write_tsv`]; order is kept.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(format!("vocab line {}", lineno + 1), "missing tab"))?;
            let count = count.trim().parse().map_err(|e| {
                Error::parse(format!("vocab line {}", lineno + 1), format!("{e}"))
            })?;
            words.push(word.to_owned());
            counts.push(count);
        }
        Self::from_ordered(words, counts)
    }
}

/// Counts tokens over all pieces and keeps words seen at least `min_count`
/// times.
pub fn build_vocabulary(collections: &[ConceptCollection], min_count: u64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::invalid("min_count must be at least 1"));
    }

    let counts = collections
        .par_iter()
        .fold(FnvHashMap::<&str, u64>::default, |mut acc, coll| {
            for piece in &coll.pieces {
                for token in &piece.tokens {
                    *acc.entry(token.as_str()).or_default() += 1;
                }
            }
            acc
        })
        .reduce(FnvHashMap::default, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });

    if counts.is_empty() {
        return Err(Error::Empty("corpus contains no tokens".into()));
    }

    let vocab = Vocabulary::from_counts(
        counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(w, c)| (w.to_owned(), c)),
    );
    if vocab.is_empty() {
        return Err(Error::Empty(format!(
            "no word occurs at least {min_count} times"
        )));
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piece(concept: &str, user: &str, tokens: &[&str]) -> MetadataPiece {
        MetadataPiece {
            concept_id: concept.into(),
            user_id: user.into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn jsonl(lines: &[String]) -> std::io::Cursor<Vec<u8>> {
        std::io::Cursor::new(lines.join("\n").into_bytes())
    }

    #[test]
    fn tokenize_multilingual_title() {
        let toks = tokenize("Ísmáfur Pagophila eburnea Ivory Gull", &[], &StopWords::empty());
        assert_eq!(toks, ["ísmáfur", "pagophila", "eburnea", "ivory", "gull"]);
    }

    #[test]
    fn tokenize_dedups_tags() {
        let tags = vec!["gull".to_string(), "gull".into(), "arctic".into()];
        assert_eq!(tokenize("", &tags, &StopWords::empty()), ["gull", "arctic"]);
    }

    #[test]
    fn tokenize_removes_stopwords() {
        let sw = StopWords::from_words(["the"]);
        assert_eq!(tokenize("the Gull", &[], &sw), ["gull"]);
    }

    #[test]
    fn tokenize_keeps_concatenated_tags_and_drops_digits() {
        let tags = vec!["IvoryGull".to_string(), "2019".into(), "lake superior".into()];
        let toks = tokenize("Gull, 2019!", &tags, &StopWords::empty());
        assert_eq!(toks, ["gull", "ivorygull", "lakesuperior"]);
    }

    #[test]
    fn tokenize_composes_decomposed_accents() {
        // "I" + combining acute accent
        let toks = tokenize("I\u{301}sma\u{301}fur", &[], &StopWords::empty());
        assert_eq!(toks, ["ísmáfur"]);
    }

    #[test]
    fn load_groups_by_concept() {
        let lines: Vec<String> = (0..3)
            .map(|i| format!(r#"{{"concept":"gull","user":"u{i}","title":"ivory gull","tags":[]}}"#))
            .collect();
        let load = read_metadata(jsonl(&lines), 5000, &StopWords::empty()).unwrap();
        assert_eq!(load.collections.len(), 1);
        assert_eq!(load.collections[0].pieces.len(), 3);
        assert_eq!(load.malformed_lines, 0);
    }

    #[test]
    fn load_truncates_at_cap() {
        let lines: Vec<String> = (0..6000)
            .map(|i| format!(r#"{{"concept":"gull","user":"u{i}","title":"gull w{i}","tags":[]}}"#))
            .collect();
        let load = read_metadata(jsonl(&lines), 5000, &StopWords::empty()).unwrap();
        assert_eq!(load.collections[0].pieces.len(), 5000);
        assert_eq!(load.truncated_pieces, 1000);
        // file order: the first piece retained is the first line
        assert_eq!(load.collections[0].pieces[0].user_id, "u0");
        assert_eq!(load.collections[0].pieces[4999].user_id, "u4999");
    }

    #[test]
    fn load_skips_line_missing_user() {
        let lines = vec![
            r#"{"concept":"gull","title":"gull","tags":[]}"#.to_string(),
            r#"{"concept":"gull","user":"u1","title":"gull","tags":[]}"#.to_string(),
            "not json".to_string(),
        ];
        let load = read_metadata(jsonl(&lines), 10, &StopWords::empty()).unwrap();
        assert_eq!(load.malformed_lines, 2);
        assert_eq!(load.piece_count(), 1);
    }

    #[test]
    fn load_drops_empty_pieces() {
        let lines = vec![r#"{"concept":"c","user":"u","title":"the 2019","tags":[]}"#.to_string()];
        let load = read_metadata(jsonl(&lines), 10, &StopWords::english()).unwrap();
        assert_eq!(load.piece_count(), 0);
        assert_eq!(load.empty_pieces, 1);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_metadata("/nonexistent/meta.jsonl", 10, &StopWords::empty()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn vocabulary_threshold() {
        let mut coll = ConceptCollection::new("c");
        for i in 0..6 {
            let toks: &[&str] = if i < 4 { &["gull", "rare"] } else { &["gull"] };
            coll.pieces.push(piece("c", "u", toks));
        }
        let vocab = build_vocabulary(&[coll], 5).unwrap();
        assert_eq!(vocab.words(), ["gull"]);
        assert_eq!(vocab.count(0), 6);
    }

    #[test]
    fn vocabulary_min_count_one_keeps_all_and_orders() {
        let mut coll = ConceptCollection::new("c");
        coll.pieces.push(piece("c", "u", &["b", "a", "c"]));
        coll.pieces.push(piece("c", "u", &["c"]));
        let vocab = build_vocabulary(&[coll], 1).unwrap();
        assert_eq!(vocab.words(), ["c", "a", "b"]);
        assert_eq!(vocab.counts(), [2, 1, 1]);
        for (i, w) in vocab.words().iter().enumerate() {
            assert_eq!(vocab.index_of(w), Some(i as u32));
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(build_vocabulary(&[], 1), Err(Error::Empty(_))));
        assert!(build_vocabulary(&[ConceptCollection::new("c")], 0).is_err());
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let vocab = Vocabulary::from_counts([("gull", 3), ("arctic", 2)]);
        let mut buf = Vec::new();
        vocab.write_tsv(&mut buf).unwrap();
        let back = Vocabulary::read_tsv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, vocab);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn retokenizing_alphabetic_tokens_is_identity(words in prop::collection::vec("[a-zà-ö]{1,8}", 0..12)) {
                let sw = StopWords::english();
                let toks = tokenize(&words.join(" "), &[], &sw);
                let again = tokenize(&toks.join(" "), &[], &sw);
                prop_assert_eq!(toks, again);
            }

            #[test]
            fn vocabulary_matches_recount(
                pieces in prop::collection::vec(prop::collection::hash_set("[a-e]{1,2}", 1..6), 1..40),
                min_count in 1u64..4,
            ) {
                let mut coll = ConceptCollection::new("c");
                let mut tally: HashMap<String, u64> = HashMap::new();
                for toks in &pieces {
                    let toks: Vec<String> = toks.iter().cloned().collect();
                    for t in &toks {
                        *tally.entry(t.clone()).or_default() += 1;
                    }
                    coll.pieces.push(MetadataPiece { concept_id: "c".into(), user_id: "u".into(), tokens: toks });
                }
                match build_vocabulary(&[coll], min_count) {
                    Ok(vocab) => {
                        let expected: HashMap<_, _> = tally.iter().filter(|(_, &c)| c >= min_count).collect();
                        prop_assert_eq!(vocab.len(), expected.len());
                        for (w, c) in expected {
                            let idx = vocab.index_of(w).unwrap();
                            prop_assert_eq!(vocab.count(idx), *c);
                        }
                    }
                    Err(_) => prop_assert!(tally.values().all(|&c| c < min_count)),
                }
            }
        }
    }
}
