//! Skip-gram training pairs from concept collections.
//!
//! Every piece contributes all distinct pairs of its in-vocabulary tokens.
//! In raw mode pairs repeat across pieces; in voted mode a pair is emitted
//! at most once per (concept, user), which neutralizes bulk tagging.

mod extsort;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use fnv::FnvHashSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::extsort::{ExternalSorter, FixedRecord};
use crate::corpus::{ConceptCollection, Vocabulary};
use crate::error::{Error, Result};

/// Unordered word pair stored as `left < right`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainingPair {
    pub left: u32,
    pub right: u32,
}

impl TrainingPair {
    /// Canonical pair, or `None` when both sides are the same word.
    pub fn new(a: u32, b: u32) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(TrainingPair { left: a, right: b }),
            std::cmp::Ordering::Greater => Some(TrainingPair { left: b, right: a }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// A user's vote for a pair within one concept.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VoteKey {
    pub concept_id: String,
    pub user_id: String,
    pub pair: TrainingPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    Raw,
    Voted,
}

impl std::fmt::Display for PairMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairMode::Raw => "raw",
            PairMode::Voted => "voted",
        })
    }
}

impl std::str::FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(PairMode::Raw),
            "voted" => Ok(PairMode::Voted),
            _ => Err(Error::invalid(format!("unknown pair mode {s:?} (raw|voted)"))),
        }
    }
}

/// How voted-mode deduplication keeps its state.
#[derive(Clone, Copy, Debug)]
pub struct DedupConfig {
    /// Largest number of candidate (user, pair) records a concept may
    /// produce before dedup switches from a hash set to external sorting.
    pub memory_records: usize,
    /// Records per sorted run when sorting externally.
    pub chunk_records: usize,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            memory_records: 50_000_000,
            chunk_records: 4_000_000,
        }
    }
}

fn piece_indices(tokens: &[String], vocab: &Vocabulary) -> Vec<u32> {
    let mut idx: Vec<u32> = tokens.iter().filter_map(|t| vocab.index_of(t)).collect();
    // pieces are deduplicated at ingestion, but a hand-built piece may not be
    let mut seen = FnvHashSet::default();
    idx.retain(|i| seen.insert(*i));
    idx
}

fn for_each_piece_pair(indices: &[u32], mut f: impl FnMut(TrainingPair)) {
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            if let Some(p) = TrainingPair::new(i, j) {
                f(p);
            }
        }
    }
}

/// All distinct token pairs of every piece; out-of-vocabulary tokens are
/// dropped first.
pub fn pairs_raw(collection: &ConceptCollection, vocab: &Vocabulary) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for piece in &collection.pieces {
        let idx = piece_indices(&piece.tokens, vocab);
        for_each_piece_pair(&idx, |p| out.push(p));
    }
    out
}

/// Pairs emitted at most once per user within the collection, in order of
/// first occurrence.
pub fn pairs_voted(collection: &ConceptCollection, vocab: &Vocabulary) -> Vec<TrainingPair> {
    pairs_voted_with(collection, vocab, &DedupConfig::default())
        .expect("in-memory dedup does not fail")
}

/// [`pairs_voted`] with explicit control over the dedup strategy. Both
/// strategies return identical output.
pub fn pairs_voted_with(
    collection: &ConceptCollection,
    vocab: &Vocabulary,
    dedup: &DedupConfig,
) -> Result<Vec<TrainingPair>> {
    let mut users: HashMap<&str, u32> = HashMap::new();
    let pieces: Vec<(u32, Vec<u32>)> = collection
        .pieces
        .iter()
        .map(|p| {
            let next = users.len() as u32;
            let user = *users.entry(p.user_id.as_str()).or_insert(next);
            (user, piece_indices(&p.tokens, vocab))
        })
        .collect();
    let candidates: usize = pieces
        .iter()
        .map(|(_, idx)| idx.len() * idx.len().saturating_sub(1) / 2)
        .sum();

    if candidates <= dedup.memory_records {
        let mut seen = FnvHashSet::default();
        let mut out = Vec::new();
        for (user, idx) in &pieces {
            for_each_piece_pair(idx, |p| {
                if seen.insert((*user, p)) {
                    out.push(p);
                }
            });
        }
        Ok(out)
    } else {
        voted_external(&pieces, dedup.chunk_records)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct VoteRecord {
    user: u32,
    left: u32,
    right: u32,
    seq: u64,
}

impl FixedRecord for VoteRecord {
    const WIDTH: usize = 20;

    fn encode(&self, out: &mut [u8]) {
        out[0..4].copy_from_slice(&self.user.to_le_bytes());
        out[4..8].copy_from_slice(&self.left.to_le_bytes());
        out[8..12].copy_from_slice(&self.right.to_le_bytes());
        out[12..20].copy_from_slice(&self.seq.to_le_bytes());
    }

    fn decode(buf: &[u8]) -> Self {
        VoteRecord {
            user: u32::from_le_bytes(buf[0..4].try_into().unwrap()),
            left: u32::from_le_bytes(buf[4..8].try_into().unwrap()),
            right: u32::from_le_bytes(buf[8..12].try_into().unwrap()),
            seq: u64::from_le_bytes(buf[12..20].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct SeqRecord {
    seq: u64,
    left: u32,
    right: u32,
}

impl FixedRecord for SeqRecord {
    const WIDTH: usize = 16;

    fn encode(&self, out: &mut [u8]) {
        out[0..8].copy_from_slice(&self.seq.to_le_bytes());
        out[8..12].copy_from_slice(&self.left.to_le_bytes());
        out[12..16].copy_from_slice(&self.right.to_le_bytes());
    }

    fn decode(buf: &[u8]) -> Self {
        SeqRecord {
            seq: u64::from_le_bytes(buf[0..8].try_into().unwrap()),
            left: u32::from_le_bytes(buf[8..12].try_into().unwrap()),
            right: u32::from_le_bytes(buf[12..16].try_into().unwrap()),
        }
    }
}

// Sort by (user, pair, seq), keep the first record of each key, then restore
// emission order by sorting the survivors on seq.
fn voted_external(pieces: &[(u32, Vec<u32>)], chunk_records: usize) -> Result<Vec<TrainingPair>> {
    let sorter = ExternalSorter::new(chunk_records);
    let mut records = Vec::new();
    let mut seq = 0u64;
    for (user, idx) in pieces {
        for_each_piece_pair(idx, |p| {
            records.push(VoteRecord {
                user: *user,
                left: p.left,
                right: p.right,
                seq,
            });
            seq += 1;
        });
    }

    let mut survivors = Vec::new();
    let mut last: Option<(u32, u32, u32)> = None;
    for rec in sorter.sort(records)? {
        let rec = rec?;
        let key = (rec.user, rec.left, rec.right);
        if last != Some(key) {
            survivors.push(SeqRecord {
                seq: rec.seq,
                left: rec.left,
                right: rec.right,
            });
            last = Some(key);
        }
    }

    sorter
        .sort(survivors)?
        .map(|r| {
            r.map(|r| TrainingPair {
                left: r.left,
                right: r.right,
            })
        })
        .collect()
}

/// Unique vote keys of a collection, in first-occurrence order.
pub fn vote_keys(collection: &ConceptCollection, vocab: &Vocabulary) -> Vec<VoteKey> {
    let mut seen = FnvHashSet::default();
    let mut out = Vec::new();
    for piece in &collection.pieces {
        let idx = piece_indices(&piece.tokens, vocab);
        for_each_piece_pair(&idx, |p| {
            if seen.insert((piece.user_id.as_str(), p)) {
                out.push(VoteKey {
                    concept_id: collection.concept_id.clone(),
                    user_id: piece.user_id.clone(),
                    pair: p,
                });
            }
        });
    }
    out
}

/// Pairs of all collections, concatenated in collection order. Concepts are
/// processed in parallel; the output does not depend on the thread count.
pub fn extract_pairs(
    collections: &[ConceptCollection],
    vocab: &Vocabulary,
    mode: PairMode,
    dedup: &DedupConfig,
) -> Result<Vec<TrainingPair>> {
    let parts: Vec<Vec<TrainingPair>> = collections
        .par_iter()
        .map(|c| match mode {
            PairMode::Raw => Ok(pairs_raw(c, vocab)),
            PairMode::Voted => pairs_voted_with(c, vocab, dedup),
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// Keeps each piece independently with probability `1 - remove_fraction`.
pub fn ablate_corpus(
    collections: &[ConceptCollection],
    remove_fraction: f64,
    seed: u64,
) -> Result<Vec<ConceptCollection>> {
    if !(0.0..1.0).contains(&remove_fraction) {
        return Err(Error::invalid(format!(
            "remove fraction must be in [0, 1), got {remove_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(collections
        .iter()
        .map(|c| ConceptCollection {
            concept_id: c.concept_id.clone(),
            pieces: c
                .pieces
                .iter()
                .filter(|_| rng.random::<f64>() >= remove_fraction)
                .cloned()
                .collect(),
        })
        .collect())
}

/// Writes one `wordA wordB` line per pair.
pub fn write_pairs_text<W: Write>(pairs: &[TrainingPair], vocab: &Vocabulary, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    for p in pairs {
        writeln!(w, "{} {}", vocab.word(p.left), vocab.word(p.right))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a two-token-per-line pair file. Unknown words and self-pairs are
/// errors.
pub fn read_pairs_text<R: BufRead>(r: R, vocab: &Vocabulary) -> Result<Vec<TrainingPair>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("pair line {}", lineno + 1);
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(loc(), "expected exactly two words"));
        };
        let lookup = |w: &str| {
            vocab
                .index_of(w)
                .ok_or_else(|| Error::parse(loc(), format!("word {w:?} not in vocabulary")))
        };
        let pair = TrainingPair::new(lookup(a)?, lookup(b)?)
            .ok_or_else(|| Error::parse(loc(), "pair of identical words"))?;
        out.push(pair);
    }
    Ok(out)
}

/// Little-endian u32 index pairs, 8 bytes each.
pub fn write_pairs_binary<W: Write>(pairs: &[TrainingPair], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    for p in pairs {
        w.write_all(&p.left.to_le_bytes())?;
        w.write_all(&p.right.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs_binary<R: Read>(r: R, vocab_len: usize) -> Result<Vec<TrainingPair>> {
    let mut bytes = Vec::new();
    BufReader::new(r).read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::parse("binary pair file", "length is not a multiple of 8"));
    }
    bytes
        .chunks_exact(8)
        .enumerate()
        .map(|(i, c)| {
            let a = u32::from_le_bytes(c[0..4].try_into().unwrap());
            let b = u32::from_le_bytes(c[4..8].try_into().unwrap());
            if a as usize >= vocab_len || b as usize >= vocab_len {
                return Err(Error::parse(format!("pair {i}"), "index out of vocabulary"));
            }
            TrainingPair::new(a, b).ok_or_else(|| Error::parse(format!("pair {i}"), "self pair"))
        })
        .collect()
}

/// Loads a pair file, picking the binary reader for `.bin` files.
pub fn load_pairs(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Vec<TrainingPair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "bin") {
        read_pairs_binary(file, vocab.len())
    } else {
        read_pairs_text(BufReader::new(file), vocab)
    }
}
