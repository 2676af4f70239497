//! Sparse word-word co-occurrence counts from a pair stream, for external
//! GloVe-style trainers.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::pairs::TrainingPair;

/// Symmetric sparse count matrix; only canonical `(i < j)` cells are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    cells: BTreeMap<(u32, u32), u64>,
}

impl CooccurrenceMatrix {
    pub fn from_pairs(pairs: &[TrainingPair]) -> Self {
        let mut cells = BTreeMap::new();
        for p in pairs {
            *cells.entry((p.left, p.right)).or_insert(0) += 1;
        }
        CooccurrenceMatrix { cells }
    }

    pub fn get(&self, i: u32, j: u32) -> u64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.cells.get(&key).copied().unwrap_or(0)
    }

    /// Number of distinct unordered cells.
    pub fn nnz(&self) -> usize {
        self.cells.len()
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    /// Cells in both orientations, sorted by (row, column).
    pub fn entries(&self) -> Vec<(u32, u32, u64)> {
        let mut out: Vec<(u32, u32, u64)> = self
            .cells
            .iter()
            .flat_map(|(&(i, j), &c)| [(i, j, c), (j, i, c)])
            .collect();
        out.sort_unstable();
        out
    }

    /// Text lines `i j count`, both orientations, 0-based vocabulary indices.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, j, c) in self.entries() {
            writeln!(w, "{i} {j} {c}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let loc = || format!("co-occurrence line {}", lineno + 1);
            let fields: Vec<u64> = line
                .split_whitespace()
                .map(|f| f.parse::<u64>().map_err(|e| Error::parse(loc(), format!("{e}"))))
                .collect::<Result<_>>()?;
            let [i, j, c] = fields[..] else {
                return Err(Error::parse(loc(), "expected `i j count`"));
            };
            if i < j {
                cells.insert((i as u32, j as u32), c);
            }
        }
        Ok(CooccurrenceMatrix { cells })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: u32, b: u32) -> TrainingPair {
        TrainingPair::new(a, b).unwrap()
    }

    #[test]
    fn counts_and_symmetry() {
        let pairs = [p(0, 1), p(1, 0), p(2, 1), p(0, 1)];
        let m = CooccurrenceMatrix::from_pairs(&pairs);
        assert_eq!(m.get(0, 1), 3);
        assert_eq!(m.get(1, 0), 3);
        assert_eq!(m.get(1, 2), 1);
        assert_eq!(m.get(0, 2), 0);
        assert_eq!(m.total(), 4);
    }

    #[test]
    fn unique_pairs_are_binary() {
        let pairs = [p(0, 1), p(0, 2), p(1, 2)];
        let m = CooccurrenceMatrix::from_pairs(&pairs);
        assert!(m.entries().iter().all(|&(_, _, c)| c == 1));
    }

    #[test]
    fn text_round_trip() {
        let m = CooccurrenceMatrix::from_pairs(&[p(0, 1), p(3, 1), p(0, 1)]);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0 1 2\n1 0 2\n1 3 1\n3 1 1\n");
        assert_eq!(CooccurrenceMatrix::read_text(&buf[..]).unwrap(), m);
    }
}
