//! Negative sampling and frequent-word subsampling.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Unigram distribution raised to the 3/4 power.
pub struct NegativeTable {
    probs: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl NegativeTable {
    pub const POWER: f64 = 0.75;

    pub fn new(counts: &[u64]) -> Result<Self> {
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64).powf(Self::POWER))
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Empty("negative table needs a positive count".into()));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::invalid(format!("negative table: {e}")))?;
        Ok(NegativeTable { probs, alias })
    }

    pub fn probability(&self, idx: u32) -> f64 {
        self.probs[idx as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.alias.sample(rng) as u32
    }
}

/// Probability of keeping one occurrence of a word with relative frequency
/// `freq` (count / total) under threshold `sample`.
pub fn keep_probability(freq: f64, sample: f64) -> f64 {
    if freq <= 0.0 {
        return 1.0;
    }
    let ratio = sample / freq;
    ((1.0 / ratio).sqrt() + 1.0) * ratio
}

/// Per-occurrence subsampling decision for a vocabulary word.
pub fn subsample_keep<R: Rng + ?Sized>(word: u32, vocab: &Vocabulary, sample: f64, rng: &mut R) -> bool {
    let total = vocab.total_count() as f64;
    let freq = vocab.count(word) as f64 / total;
    let p = keep_probability(freq, sample);
    p >= 1.0 || rng.random::<f64>() < p
}

/// Precomputed keep probabilities for a whole vocabulary.
pub struct SubsampleTable(Vec<f64>);

impl SubsampleTable {
    pub fn new(counts: &[u64], sample: f64) -> Self {
        let total: u64 = counts.iter().sum();
        SubsampleTable(
            counts
                .iter()
                .map(|&c| {
                    if sample <= 0.0 || total == 0 {
                        1.0
                    } else {
                        keep_probability(c as f64 / total as f64, sample).min(1.0)
                    }
                })
                .collect(),
        )
    }

    #[inline]
    pub fn keep<R: Rng + ?Sized>(&self, word: u32, rng: &mut R) -> bool {
        let p = self.0[word as usize];
        p >= 1.0 || rng.random::<f64>() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rare_words_always_kept() {
        assert!(keep_probability(1e-5, 1e-4) >= 1.0);
        assert!(keep_probability(1e-4, 1e-4) >= 1.0);
    }

    #[test]
    fn keep_probability_at_one_percent() {
        assert!((keep_probability(1e-2, 1e-4) - 0.11).abs() < 1e-12);
    }

    #[test]
    fn empirical_keep_rate_within_three_sigma() {
        // 1 word at 1% of a 10^4-token corpus
        let vocab = Vocabulary::from_counts([("frequent", 100u64), ("rest", 9_900)]);
        let idx = vocab.index_of("frequent").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let kept = (0..n).filter(|_| subsample_keep(idx, &vocab, 1e-4, &mut rng)).count();
        let p = 0.11;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((kept as f64 - n as f64 * p).abs() <= 3.0 * sigma, "kept {kept}");
    }

    #[test]
    fn negative_table_matches_power_law() {
        let counts: Vec<u64> = (1..=10).map(|i| i * i * 7).collect();
        let table = NegativeTable::new(&counts).unwrap();
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        assert!((table.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000;
        let mut hist = [0usize; 10];
        for _ in 0..draws {
            hist[table.sample(&mut rng) as usize] += 1;
        }
        for i in 0..10 {
            let expected = weights[i] / total;
            let observed = hist[i] as f64 / draws as f64;
            assert!((observed - expected).abs() < 0.01, "word {i}: {observed} vs {expected}");
            assert!(table.probability(i as u32) > 0.0);
        }
    }
}
