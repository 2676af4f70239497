//! Class prototypes from class-name variants.
//!
//! A variant ("ivory gull") is the mean of its token vectors; a class is the
//! mean of its resolvable variants. Out-of-vocabulary tokens fall back to
//! subword composition when the model has subwords; a variant with no
//! resolvable token is retried as its concatenated form ("ivorygull").

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use crate::corpus::{tokenize, StopWords};
use crate::error::{Error, Result};
use crate::matrix_io::read_keyed_matrix;
use crate::sgns::EmbeddingMatrix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassNameEntry {
    pub class_id: String,
    pub variants: Vec<String>,
}

/// Reads `class_id<TAB>variant1|variant2|...` lines.
pub fn read_class_names<R: BufRead>(r: R) -> Result<Vec<ClassNameEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("class-name line {}", lineno + 1);
        let (id, variants) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(loc(), "expected class_id<TAB>variants"))?;
        let variants: Vec<String> = variants
            .split('|')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
            .collect();
        if variants.is_empty() {
            return Err(Error::parse(loc(), "class has no variant"));
        }
        out.push(ClassNameEntry {
            class_id: id.trim().to_owned(),
            variants,
        });
    }
    Ok(out)
}

pub fn load_class_names(path: impl AsRef<Path>) -> Result<Vec<ClassNameEntry>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_class_names(BufReader::new(f))
}

pub fn write_class_names<W: Write>(entries: &[ClassNameEntry], mut w: W) -> Result<()> {
    for e in entries {
        writeln!(w, "{}\t{}", e.class_id, e.variants.join("|"))?;
    }
    Ok(())
}

/// Rows of class vectors aligned with `class_ids`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeSet {
    pub class_ids: Vec<String>,
    /// C x K
    pub matrix: DMatrix<f64>,
    pub normalized: bool,
    /// Classes without any resolvable variant (their rows are zero).
    pub unresolved: Vec<String>,
}

impl PrototypeSet {
    pub fn new(class_ids: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if class_ids.len() != matrix.nrows() {
            return Err(Error::shape(format!(
                "{} class ids for {} prototype rows",
                class_ids.len(),
                matrix.nrows()
            )));
        }
        Ok(PrototypeSet {
            class_ids,
            matrix,
            normalized: false,
            unresolved: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn position(&self, class_id: &str) -> Option<usize> {
        self.class_ids.iter().position(|c| c == class_id)
    }

    /// Rows for the given ids, in that order.
    pub fn select(&self, ids: &[String]) -> Result<PrototypeSet> {
        let rows: Vec<usize> = ids
            .iter()
            .map(|id| {
                self.position(id)
                    .ok_or_else(|| Error::invalid(format!("no prototype for class {id:?}")))
            })
            .collect::<Result<_>>()?;
        Ok(PrototypeSet {
            class_ids: ids.to_vec(),
            matrix: self.matrix.select_rows(&rows),
            normalized: self.normalized,
            unresolved: self
                .unresolved
                .iter()
                .filter(|u| ids.contains(u))
                .cloned()
                .collect(),
        })
    }

    /// Same text layout as word2vec embeddings, keyed by class id.
    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (i, id) in self.class_ids.iter().enumerate() {
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(Error::invalid(format!("class id {id:?} cannot be written as a row key")));
            }
            write!(w, "{id}")?;
            for x in self.matrix.row(i).iter() {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(f)
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (ids, matrix) = read_keyed_matrix(r)?;
        PrototypeSet::new(ids, matrix)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(f))
    }
}

fn mean_vectors(vectors: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn resolve_variant(variant: &str, embeddings: &EmbeddingMatrix) -> Option<Vec<f64>> {
    let tokens = tokenize(variant, &[], &StopWords::empty());
    if tokens.is_empty() {
        return None;
    }
    let to64 = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
    let found: Vec<Vec<f64>> = tokens
        .iter()
        .filter_map(|t| embeddings.lookup(t))
        .map(to64)
        .collect();
    if !found.is_empty() {
        return Some(mean_vectors(&found, embeddings.dim()));
    }
    if tokens.len() > 1 {
        return embeddings.lookup(&tokens.concat()).map(to64);
    }
    None
}

/// Builds one prototype per class entry.
pub fn build_prototypes(entries: &[ClassNameEntry], embeddings: &EmbeddingMatrix) -> Result<PrototypeSet> {
    let dim = embeddings.dim();
    let mut matrix = DMatrix::zeros(entries.len(), dim);
    let mut unresolved = Vec::new();

    for (row, entry) in entries.iter().enumerate() {
        let variants: Vec<Vec<f64>> = entry
            .variants
            .iter()
            .filter_map(|v| resolve_variant(v, embeddings))
            .collect();
        if variants.is_empty() {
            warn!("class {:?}: no variant resolves to a vector", entry.class_id);
            unresolved.push(entry.class_id.clone());
            continue;
        }
        for (k, x) in mean_vectors(&variants, dim).into_iter().enumerate() {
            matrix[(row, k)] = x;
        }
    }

    if !entries.is_empty() && unresolved.len() == entries.len() {
        return Err(Error::Empty("no class name could be resolved in the embeddings".into()));
    }
    Ok(PrototypeSet {
        class_ids: entries.iter().map(|e| e.class_id.clone()).collect(),
        matrix,
        normalized: false,
        unresolved,
    })
}

/// Scales every nonzero row to unit l2 norm. Zero rows are left as they
/// are and reported. With `enable == false` this is the identity.
pub fn normalize(protos: &PrototypeSet, enable: bool) -> PrototypeSet {
    let mut out = protos.clone();
    if !enable {
        return out;
    }
    for (i, mut row) in out.matrix.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        } else {
            warn!("class {:?}: zero prototype left unnormalized", protos.class_ids[i]);
        }
    }
    out.normalized = true;
    out
}

/// Indices of all-zero rows.
pub fn zero_rows(protos: &PrototypeSet) -> Vec<usize> {
    protos
        .matrix
        .row_iter()
        .enumerate()
        .filter(|(_, r)| r.iter().all(|&x| x == 0.0))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use proptest::prelude::*;

    fn emb(words: &[(&str, [f32; 2])]) -> EmbeddingMatrix {
        let vocab = Vocabulary::from_ordered(
            words.iter().map(|(w, _)| w.to_string()).collect(),
            vec![1; words.len()],
        )
        .unwrap();
        let vecs = words.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        EmbeddingMatrix::from_word_vectors(vocab, 2, vecs).unwrap()
    }

    fn entry(id: &str, variants: &[&str]) -> ClassNameEntry {
        ClassNameEntry {
            class_id: id.into(),
            variants: variants.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn row(p: &PrototypeSet, i: usize) -> Vec<f64> {
        p.matrix.row(i).iter().copied().collect()
    }

    #[test]
    fn multiword_variant_is_token_mean() {
        let e = emb(&[("ivory", [1.0, 0.0]), ("gull", [0.0, 1.0])]);
        let p = build_prototypes(&[entry("c1", &["ivory gull"])], &e).unwrap();
        assert_eq!(row(&p, 0), [0.5, 0.5]);
    }

    #[test]
    fn single_word_is_its_vector() {
        let e = emb(&[("gull", [0.25, -2.0])]);
        let p = build_prototypes(&[entry("c1", &["Gull"])], &e).unwrap();
        assert_eq!(row(&p, 0), [0.25, -2.0]);
    }

    #[test]
    fn variants_are_averaged() {
        let e = emb(&[("morel", [1.0, 0.0]), ("morchella", [0.0, 1.0])]);
        let p = build_prototypes(&[entry("m", &["morel", "morchella"])], &e).unwrap();
        assert_eq!(row(&p, 0), [0.5, 0.5]);
    }

    #[test]
    fn concatenated_fallback_and_unresolved() {
        let e = emb(&[("ivorygull", [2.0, 2.0]), ("tern", [1.0, 1.0])]);
        let p = build_prototypes(&[entry("a", &["ivory gull"]), entry("b", &["kittiwake"]), entry("c", &["tern"])], &e)
            .unwrap();
        assert_eq!(row(&p, 0), [2.0, 2.0]);
        assert_eq!(row(&p, 1), [0.0, 0.0]);
        assert_eq!(p.unresolved, ["b"]);
        assert_eq!(zero_rows(&p), [1]);
        assert!(matches!(
            build_prototypes(&[entry("b", &["kittiwake"])], &e),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        let p = PrototypeSet::new(
            vec!["a".into(), "z".into()],
            DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]),
        )
        .unwrap();
        let n = normalize(&p, true);
        assert_eq!(row(&n, 0), [0.6, 0.8]);
        assert_eq!(row(&n, 1), [0.0, 0.0]);
        assert!(n.normalized);
        assert_eq!(normalize(&p, false), p);
    }

    #[test]
    fn class_names_parse() {
        let got = read_class_names("c1\tivory gull|Pagophila eburnea\n\nc2\tmorel\n".as_bytes()).unwrap();
        assert_eq!(got, [entry("c1", &["ivory gull", "Pagophila eburnea"]), entry("c2", &["morel"])]);
        assert!(read_class_names("c1 no tab\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_class_names(&got, &mut buf).unwrap();
        assert_eq!(read_class_names(&buf[..]).unwrap(), got);
    }

    #[test]
    fn text_round_trip_and_select() {
        let p = PrototypeSet::new(
            vec!["x".into(), "y".into()],
            DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 1.0 / 3.0, -1.0, 0.0, 5.5]),
        )
        .unwrap();
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        assert_eq!(PrototypeSet::read_text(&buf[..]).unwrap(), p);
        let s = p.select(&["y".into()]).unwrap();
        assert_eq!(row(&s, 0), [-1.0, 0.0, 5.5]);
        assert!(p.select(&["q".into()]).is_err());
        assert!(PrototypeSet::read_text("2 3\nx 1 2 3\n".as_bytes()).is_err());
    }

    fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0f64..10.0, r * c)
                .prop_map(move |v| DMatrix::from_row_slice(r, c, &v))
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(m in matrix_strategy()) {
            let ids = (0..m.nrows()).map(|i| i.to_string()).collect();
            let p = PrototypeSet::new(ids, m).unwrap();
            let once = normalize(&p, true);
            let twice = normalize(&once, true);
            for (a, b) in once.matrix.iter().zip(twice.matrix.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for r in once.matrix.row_iter() {
                let n = r.norm();
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn variant_order_is_irrelevant(vals in proptest::collection::vec(-5.0f32..5.0, 8), rot in 0usize..4) {
            let names = ["alpha", "beta", "gamma", "delta"];
            let words: Vec<(&str, [f32; 2])> =
                names.iter().enumerate().map(|(i, n)| (*n, [vals[2 * i], vals[2 * i + 1]])).collect();
            let e = emb(&words);
            let vars = ["alpha beta", "gamma", "delta alpha", "beta"];
            let mut rotated = vars.to_vec();
            rotated.rotate_left(rot);
            let a = build_prototypes(&[entry("c", &vars)], &e).unwrap();
            let b = build_prototypes(&[entry("c", &rotated)], &e).unwrap();
            for (x, y) in a.matrix.iter().zip(b.matrix.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let one = build_prototypes(&[entry("c", &["gamma"])], &e).unwrap();
            let dup = build_prototypes(&[entry("c", &["gamma", "gamma", "gamma"])], &e).unwrap();
            prop_assert_eq!(one.matrix, dup.matrix);
        }
    }
}
