use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::{loss_and_grad, PairGradient};
use super::subword::{subword_ngrams, SubwordConfig};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 8] = b"WZSLEMB1";

/// Input and output vector tables of a skip-gram model.
///
/// With subwords enabled the input table has `V + buckets` rows: one per
/// vocabulary word followed by the n-gram buckets. A word's vector is the
/// mean of its own row and its n-gram rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f32>,
    output: Vec<f32>,
    subword: Option<SubwordConfig>,
    word_ngrams: Vec<Vec<u32>>,
}

impl EmbeddingMatrix {
    /// Inputs uniform in `[-0.5/dim, 0.5/dim]`, outputs zero.
    pub fn init(
        vocab: Vocabulary,
        dim: usize,
        subword: Option<SubwordConfig>,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let input_rows = vocab.len() + subword.map_or(0, |s| s.buckets);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f32;
        let input = (0..input_rows * dim)
            .map(|_| rng.random_range(-half..=half))
            .collect();
        let output = vec![0.0; vocab.len() * dim];
        let word_ngrams = compute_word_ngrams(&vocab, subword);
        Ok(EmbeddingMatrix {
            vocab,
            dim,
            input,
            output,
            subword,
            word_ngrams,
        })
    }

    pub(crate) fn from_parts(
        vocab: Vocabulary,
        dim: usize,
        input: Vec<f32>,
        output: Vec<f32>,
        subword: Option<SubwordConfig>,
    ) -> Result<Self> {
        let input_rows = vocab.len() + subword.map_or(0, |s| s.buckets);
        if input.len() != input_rows * dim || !(output.is_empty() || output.len() == vocab.len() * dim) {
            return Err(Error::shape("embedding tables do not match vocabulary and dimension"));
        }
        let word_ngrams = compute_word_ngrams(&vocab, subword);
        Ok(EmbeddingMatrix {
            vocab,
            dim,
            input,
            output,
            subword,
            word_ngrams,
        })
    }

    /// Plain word vectors (no output table, no subwords).
    pub fn from_word_vectors(vocab: Vocabulary, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        Self::from_parts(vocab, dim, vectors, Vec::new(), None)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn subword(&self) -> Option<SubwordConfig> {
        self.subword
    }

    pub fn has_output(&self) -> bool {
        !self.output.is_empty()
    }

    pub fn input_table(&self) -> &[f32] {
        &self.input
    }

    pub fn output_table(&self) -> &[f32] {
        &self.output
    }

    pub fn input_row(&self, row: usize) -> &[f32] {
        &self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn output_row(&self, word: u32) -> &[f32] {
        let w = word as usize;
        &self.output[w * self.dim..(w + 1) * self.dim]
    }

    /// Input-table rows composing a vocabulary word.
    pub fn composition_rows(&self, word: u32) -> Vec<usize> {
        let mut rows = vec![word as usize];
        if self.subword.is_some() {
            let base = self.vocab.len();
            rows.extend(self.word_ngrams[word as usize].iter().map(|&b| base + b as usize));
        }
        rows
    }

    fn mean_rows(&self, rows: &[usize]) -> Vec<f32> {
        let mut v = vec![0.0f32; self.dim];
        for &r in rows {
            for (acc, x) in v.iter_mut().zip(self.input_row(r)) {
                *acc += x;
            }
        }
        let n = rows.len() as f32;
        v.iter_mut().for_each(|x| *x /= n);
        v
    }

    /// Final vector of a vocabulary word.
    pub fn word_vector(&self, word: u32) -> Vec<f32> {
        self.mean_rows(&self.composition_rows(word))
    }

    /// Vector of any string: vocabulary words directly, out-of-vocabulary
    /// words through their n-grams when the model has subwords.
    pub fn lookup(&self, word: &str) -> Option<Vec<f32>> {
        if let Some(idx) = self.vocab.index_of(word) {
            return Some(self.word_vector(idx));
        }
        let sw = self.subword?;
        let base = self.vocab.len();
        let rows: Vec<usize> = subword_ngrams(word, sw.minn, sw.maxn, sw.buckets)
            .into_iter()
            .map(|b| base + b)
            .collect();
        if rows.is_empty() {
            None
        } else {
            Some(self.mean_rows(&rows))
        }
    }

    /// Loss and gradients of one example at the current parameters; the
    /// center gradient is with respect to the composed input vector.
    pub fn pair_loss_grad(&self, center: u32, context: u32, negatives: &[u32]) -> Result<PairGradient<f64>> {
        let v = self.vocab.len() as u32;
        if !self.has_output() {
            return Err(Error::invalid("model has no output vectors"));
        }
        if center >= v || context >= v || negatives.iter().any(|&n| n >= v) {
            return Err(Error::invalid("word index out of range"));
        }
        let to64 = |s: &[f32]| s.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let c = to64(&self.word_vector(center));
        let ctx = to64(self.output_row(context));
        let negs: Vec<Vec<f64>> = negatives.iter().map(|&n| to64(self.output_row(n))).collect();
        let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        Ok(loss_and_grad(&c, &ctx, &neg_refs))
    }

    /// Composed word vectors, row-major `V x dim`.
    pub fn word_vectors(&self) -> Vec<f32> {
        (0..self.vocab.len() as u32)
            .flat_map(|w| self.word_vector(w))
            .collect()
    }

    /// word2vec text format: `V K` header, then `word x1 .. xK` per line.
    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{} {}", self.vocab.len(), self.dim)?;
        for idx in 0..self.vocab.len() as u32 {
            write!(w, "{}", self.vocab.word(idx))?;
            for x in self.word_vector(idx) {
                write!(w, " {x:.6}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(f)
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("embeddings header", "empty file"))??;
        let mut parts = header.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            parts
                .next()
                .ok_or_else(|| Error::parse("embeddings header", format!("missing {name}")))?
                .parse()
                .map_err(|e| Error::parse("embeddings header", format!("{name}: {e}")))
        };
        let rows = field("vocabulary size")?;
        let dim = field("dimension")?;
        if dim == 0 {
            return Err(Error::parse("embeddings header", "dimension must be positive"));
        }

        let mut words = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let loc = || format!("embeddings line {}", i + 2);
            if words.len() == rows {
                return Err(Error::shape(format!("header declares {rows} rows, found more")));
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().ok_or_else(|| Error::parse(loc(), "empty row"))?;
            let before = data.len();
            for p in parts {
                data.push(p.parse::<f32>().map_err(|e| Error::parse(loc(), format!("{e}")))?);
            }
            if data.len() - before != dim {
                return Err(Error::shape(format!(
                    "{}: expected {dim} values, found {}",
                    loc(),
                    data.len() - before
                )));
            }
            words.push(word.to_owned());
        }
        if words.len() != rows {
            return Err(Error::shape(format!(
                "header declares {rows} rows, found {}",
                words.len()
            )));
        }
        let counts = vec![0; words.len()];
        let vocab = Vocabulary::from_ordered(words, counts)?;
        Self::from_word_vectors(vocab, dim, data)
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(f))
    }

    /// Full binary model: vocabulary with counts, subword settings, input
    /// and output tables.
    pub fn write_model<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&(self.vocab.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        let (flag, sw) = match self.subword {
            Some(s) => (1u8, s),
            None => (0u8, SubwordConfig { minn: 0, maxn: 0, buckets: 0 }),
        };
        w.write_all(&[flag])?;
        for v in [sw.minn, sw.maxn, sw.buckets] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for (word, &count) in self.vocab.words().iter().zip(self.vocab.counts()) {
            w.write_all(&(word.len() as u32).to_le_bytes())?;
            w.write_all(word.as_bytes())?;
            w.write_all(&count.to_le_bytes())?;
        }
        w.write_all(&(self.output.len() as u64).to_le_bytes())?;
        for x in self.input.iter().chain(&self.output) {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_model(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_model(f)
    }

    pub fn read_model<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::parse("model file", "bad magic"));
        }
        let mut u64_buf = [0u8; 8];
        let mut read_u64 = |r: &mut BufReader<R>| -> Result<u64> {
            r.read_exact(&mut u64_buf)?;
            Ok(u64::from_le_bytes(u64_buf))
        };
        let vlen = read_u64(&mut r)? as usize;
        let dim = read_u64(&mut r)? as usize;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let minn = read_u64(&mut r)? as usize;
        let maxn = read_u64(&mut r)? as usize;
        let buckets = read_u64(&mut r)? as usize;
        let subword = (flag[0] == 1).then_some(SubwordConfig { minn, maxn, buckets });

        let mut words = Vec::with_capacity(vlen);
        let mut counts = Vec::with_capacity(vlen);
        for _ in 0..vlen {
            let mut len = [0u8; 4];
            r.read_exact(&mut len)?;
            let mut bytes = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut bytes)?;
            words.push(
                String::from_utf8(bytes).map_err(|e| Error::parse("model vocabulary", format!("{e}")))?,
            );
            counts.push(read_u64(&mut r)?);
        }
        let out_len = read_u64(&mut r)? as usize;
        let in_len = (vlen + subword.map_or(0, |s| s.buckets)) * dim;
        let mut read_f32s = |n: usize| -> Result<Vec<f32>> {
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes)?;
            Ok(bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let input = read_f32s(in_len)?;
        let output = read_f32s(out_len)?;
        let vocab = Vocabulary::from_ordered(words, counts)?;
        Self::from_parts(vocab, dim, input, output, subword)
    }

    pub fn load_model(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_model(f)
    }

    /// Loads either format: binary model files start with a magic tag,
    /// anything else is read as word2vec text.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 8];
        let is_model = f.read_exact(&mut magic).is_ok() && &magic == MODEL_MAGIC;
        if is_model {
            Self::load_model(path)
        } else {
            Self::load_text(path)
        }
    }
}

fn compute_word_ngrams(vocab: &Vocabulary, subword: Option<SubwordConfig>) -> Vec<Vec<u32>> {
    match subword {
        None => Vec::new(),
        Some(sw) => vocab
            .words()
            .iter()
            .map(|w| {
                subword_ngrams(w, sw.minn, sw.maxn, sw.buckets)
                    .into_iter()
                    .map(|b| b as u32)
                    .collect()
            })
            .collect(),
    }
}
