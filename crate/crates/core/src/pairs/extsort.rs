//! External merge sort over fixed-width binary records.
//!
//! Records are buffered up to a chunk size, sorted in memory and spilled to
//! anonymous temporary files; the sorted runs are then merged with a binary
//! heap. When everything fits in one chunk nothing touches the disk.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};

use crate::error::Result;

/// A record with a fixed little-endian encoding.
pub trait FixedRecord: Ord + Sized {
    const WIDTH: usize;
    fn encode(&self, out: &mut [u8]);
    fn decode(buf: &[u8]) -> Self;
}

#[derive(Clone, Debug)]
pub struct ExternalSorter {
    chunk_records: usize,
}

impl ExternalSorter {
    pub fn new(chunk_records: usize) -> Self {
        ExternalSorter {
            chunk_records: chunk_records.max(1),
        }
    }

    pub fn sort<R, I>(&self, records: I) -> Result<SortedRecords<R>>
    where
        R: FixedRecord,
        I: IntoIterator<Item = R>,
    {
        let mut runs = Vec::new();
        let mut buf = Vec::with_capacity(self.chunk_records.min(1 << 20));
        for rec in records {
            buf.push(rec);
            if buf.len() >= self.chunk_records {
                runs.push(spill(&mut buf)?);
            }
        }

        if runs.is_empty() {
            buf.sort_unstable();
            return Ok(SortedRecords::Memory(buf.into_iter()));
        }
        if !buf.is_empty() {
            runs.push(spill(&mut buf)?);
        }

        let mut readers = Vec::with_capacity(runs.len());
        let mut heap = BinaryHeap::with_capacity(runs.len());
        for (i, file) in runs.into_iter().enumerate() {
            let mut reader = RunReader::new(file)?;
            if let Some(rec) = reader.next_record()? {
                heap.push(Reverse((rec, i)));
            }
            readers.push(reader);
        }
        Ok(SortedRecords::Merge { readers, heap })
    }
}

fn spill<R: FixedRecord>(buf: &mut Vec<R>) -> Result<File> {
    buf.sort_unstable();
    let file = tempfile::tempfile()?;
    let mut writer = BufWriter::new(file);
    let mut bytes = vec![0u8; R::WIDTH];
    for rec in buf.drain(..) {
        rec.encode(&mut bytes);
        writer.write_all(&bytes)?;
    }
    let mut file = writer.into_inner().map_err(|e| e.into_error())?;
    file.seek(SeekFrom::Start(0))?;
    Ok(file)
}

pub struct RunReader {
    reader: BufReader<File>,
    bytes: Vec<u8>,
}

impl RunReader {
    fn new(file: File) -> Result<Self> {
        Ok(RunReader {
            reader: BufReader::new(file),
            bytes: Vec::new(),
        })
    }

    fn next_record<R: FixedRecord>(&mut self) -> Result<Option<R>> {
        self.bytes.resize(R::WIDTH, 0);
        match self.reader.read_exact(&mut self.bytes) {
            Ok(()) => Ok(Some(R::decode(&self.bytes))),
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

pub enum SortedRecords<R> {
    Memory(std::vec::IntoIter<R>),
    Merge {
        readers: Vec<RunReader>,
        heap: BinaryHeap<Reverse<(R, usize)>>,
    },
}

impl<R: FixedRecord> Iterator for SortedRecords<R> {
    type Item = Result<R>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            SortedRecords::Memory(it) => it.next().map(Ok),
            SortedRecords::Merge { readers, heap } => {
                let Reverse((rec, run)) = heap.pop()?;
                match readers[run].next_record() {
                    Ok(Some(next)) => heap.push(Reverse((next, run))),
                    Ok(None) => {}
                    Err(e) => return Some(Err(e)),
                }
                Some(Ok(rec))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
    struct Rec(u32, u64);

    impl FixedRecord for Rec {
        const WIDTH: usize = 12;
        fn encode(&self, out: &mut [u8]) {
            out[..4].copy_from_slice(&self.0.to_le_bytes());
            out[4..].copy_from_slice(&self.1.to_le_bytes());
        }
        fn decode(buf: &[u8]) -> Self {
            Rec(
                u32::from_le_bytes(buf[..4].try_into().unwrap()),
                u64::from_le_bytes(buf[4..12].try_into().unwrap()),
            )
        }
    }

    #[test]
    fn spilled_merge_matches_in_memory_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let recs: Vec<Rec> = (0..10_000)
            .map(|_| Rec(rng.random_range(0..50), rng.random()))
            .collect();
        let mut expected = recs.clone();
        expected.sort();

        for chunk in [1, 7, 1000, 100_000] {
            let sorted: Vec<Rec> = ExternalSorter::new(chunk)
                .sort(recs.iter().copied())
                .unwrap()
                .collect::<Result<_>>()
                .unwrap();
            assert_eq!(sorted, expected, "chunk size {chunk}");
        }
    }

    #[test]
    fn empty_input() {
        let out: Vec<Rec> = ExternalSorter::new(4)
            .sort(Vec::<Rec>::new())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert!(out.is_empty());
    }
}
