//! Skip-gram with negative sampling over pair files.
//!
//! Each canonical pair trains both directions: every word is once the
//! center and once the context. The learning rate decays linearly from
//! `lr` to `lr * 1e-4` over all epochs. Word frequencies for subsampling
//! and the negative distribution are counted over the pair stream, the way
//! word2vec counts its training file.

mod cooc;
mod embeddings;
mod hogwild;
mod kernel;
mod sampling;
mod subword;

use std::sync::atomic::{AtomicU64, Ordering};

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::cooc::CooccurrenceMatrix;
pub use self::embeddings::EmbeddingMatrix;
pub use self::hogwild::SharedMatrix;
pub use self::kernel::{loss_and_grad, sigmoid, softplus, step_target, PairGradient};
pub use self::sampling::{keep_probability, subsample_keep, NegativeTable, SubsampleTable};
pub use self::subword::{bucket, ngrams, subword_ngrams, SubwordConfig, DEFAULT_BUCKETS};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::pairs::TrainingPair;

/// Floor of the linear learning-rate decay, relative to the initial rate.
pub const LR_FLOOR: f32 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub epochs: usize,
    pub lr: f32,
    pub negatives: usize,
    /// Subsampling threshold; 0 disables subsampling.
    pub sample: f64,
    pub dim: usize,
    /// Vocabulary threshold. Training takes the vocabulary as given; the
    /// pipeline builds it with this value.
    pub min_count: u64,
    pub subword: Option<SubwordConfig>,
    pub seed: u64,
    /// Single worker, bit-reproducible.
    pub deterministic: bool,
    /// Workers in performance mode.
    pub threads: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            epochs: 25,
            lr: 0.1,
            negatives: 5,
            sample: 1e-4,
            dim: 300,
            min_count: 5,
            subword: None,
            seed: 1,
            deterministic: true,
            threads: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.negatives == 0 {
            return Err(Error::invalid("negatives must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if self.sample < 0.0 {
            return Err(Error::invalid("sample must be non-negative"));
        }
        if let Some(sw) = self.subword {
            if sw.minn == 0 || sw.minn > sw.maxn || sw.buckets == 0 {
                return Err(Error::invalid("subword settings need 0 < minn <= maxn and buckets > 0"));
            }
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.threads.max(1)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss per trained example, one entry per epoch.
    pub epoch_loss: Vec<f64>,
    /// Examples (directed pairs) trained per epoch after subsampling.
    pub epoch_examples: Vec<u64>,
}

/// Occurrences of each word in a pair stream.
pub fn pair_word_counts(pairs: &[TrainingPair], vocab_len: usize) -> Vec<u64> {
    let mut counts = vec![0u64; vocab_len];
    for p in pairs {
        counts[p.left as usize] += 1;
        counts[p.right as usize] += 1;
    }
    counts
}

pub fn train(pairs: &[TrainingPair], vocab: &Vocabulary, config: &TrainerConfig) -> Result<EmbeddingMatrix> {
    train_with_report(pairs, vocab, config).map(|(m, _)| m)
}

pub fn train_with_report(
    pairs: &[TrainingPair],
    vocab: &Vocabulary,
    config: &TrainerConfig,
) -> Result<(EmbeddingMatrix, TrainReport)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("pair file has no pairs".into()));
    }
    let v = vocab.len();
    if pairs.iter().any(|p| p.right as usize >= v) {
        return Err(Error::invalid("pair index outside the vocabulary"));
    }

    let counts = pair_word_counts(pairs, v);
    let negatives = NegativeTable::new(&counts)?;
    let subsample = SubsampleTable::new(&counts, config.sample);

    let init = EmbeddingMatrix::init(vocab.clone(), config.dim, config.subword, config.seed)?;
    let composition: Vec<Vec<usize>> = (0..v as u32).map(|w| init.composition_rows(w)).collect();
    let input = SharedMatrix::from_vec(init.input_table().to_vec(), config.dim);
    let output = SharedMatrix::from_vec(init.output_table().to_vec(), config.dim);

    let ctx = TrainContext {
        config,
        input: &input,
        output: &output,
        composition: &composition,
        negatives: &negatives,
        subsample: &subsample,
        processed: AtomicU64::new(0),
        total: (config.epochs * pairs.len()) as u64,
    };

    let workers = config.workers();
    let mut order = pairs.to_vec();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(u64::MAX);
    let mut report = TrainReport::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let shard_len = order.len().div_ceil(workers);
        let stats: Vec<(f64, u64)> = std::thread::scope(|s| {
            let handles: Vec<_> = order
                .chunks(shard_len)
                .enumerate()
                .map(|(w, shard)| {
                    let ctx = &ctx;
                    s.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                        rng.set_stream((epoch * 4096 + w) as u64);
                        ctx.run_shard(shard, &mut rng)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
        });
        let (loss, examples) = stats
            .iter()
            .fold((0.0, 0u64), |(l, n), &(sl, sn)| (l + sl, n + sn));
        let mean = if examples > 0 { loss / examples as f64 } else { 0.0 };
        debug!("epoch {} mean loss {:.5} over {} examples", epoch + 1, mean, examples);
        report.epoch_loss.push(mean);
        report.epoch_examples.push(examples);
    }

    let model = EmbeddingMatrix::from_parts(
        vocab.with_counts(counts)?,
        config.dim,
        input.into_vec(),
        output.into_vec(),
        config.subword,
    )?;
    Ok((model, report))
}

struct TrainContext<'a> {
    config: &'a TrainerConfig,
    input: &'a SharedMatrix,
    output: &'a SharedMatrix,
    composition: &'a [Vec<usize>],
    negatives: &'a NegativeTable,
    subsample: &'a SubsampleTable,
    processed: AtomicU64,
    total: u64,
}

impl TrainContext<'_> {
    fn run_shard(&self, shard: &[TrainingPair], rng: &mut ChaCha8Rng) -> (f64, u64) {
        let dim = self.config.dim;
        let mut bufs = Buffers {
            hidden: vec![0.0; dim],
            row: vec![0.0; dim],
            update: vec![0.0; dim],
        };
        let mut loss = 0.0f64;
        let mut examples = 0u64;

        for pair in shard {
            let done = self.processed.fetch_add(1, Ordering::Relaxed);
            let progress = done as f32 / self.total as f32;
            let lr = self.config.lr * (1.0 - progress).max(LR_FLOOR);

            if !(self.subsample.keep(pair.left, rng) && self.subsample.keep(pair.right, rng)) {
                continue;
            }
            loss += self.train_example(pair.left, pair.right, lr, rng, &mut bufs) as f64;
            loss += self.train_example(pair.right, pair.left, lr, rng, &mut bufs) as f64;
            examples += 2;
        }
        (loss, examples)
    }

    fn train_example(
        &self,
        center: u32,
        context: u32,
        lr: f32,
        rng: &mut ChaCha8Rng,
        bufs: &mut Buffers,
    ) -> f32 {
        let rows = &self.composition[center as usize];
        bufs.hidden.iter_mut().for_each(|x| *x = 0.0);
        for &r in rows {
            self.input.load_row(r, &mut bufs.row);
            for (h, x) in bufs.hidden.iter_mut().zip(&bufs.row) {
                *h += x;
            }
        }
        let n = rows.len() as f32;
        bufs.hidden.iter_mut().for_each(|x| *x /= n);
        bufs.update.iter_mut().for_each(|x| *x = 0.0);

        let mut loss = self.step(context as usize, true, lr, bufs);
        for _ in 0..self.config.negatives {
            let neg = self.negatives.sample(rng);
            if neg == context {
                continue;
            }
            loss += self.step(neg as usize, false, lr, bufs);
        }

        // every composing row receives the full hidden-layer update
        for &r in rows {
            self.input.add_to_row(r, &bufs.update);
        }
        loss
    }

    fn step(&self, target: usize, label: bool, lr: f32, bufs: &mut Buffers) -> f32 {
        self.output.load_row(target, &mut bufs.row);
        let loss = step_target(&bufs.hidden, &mut bufs.row, label, lr, &mut bufs.update);
        self.output.store_row(target, &bufs.row);
        loss
    }
}

struct Buffers {
    hidden: Vec<f32>,
    row: Vec<f32>,
    update: Vec<f32>,
}
