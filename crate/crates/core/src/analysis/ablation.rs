//! Attribute-subset and corpus-size ablations.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::write_csv;
use super::{mean_std, topk_accuracy};
use crate::error::{Error, Result};
use crate::pairs::ablate_corpus;
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineInputs};
use crate::prototypes::{normalize, PrototypeSet};
use crate::zsl::{cross_validate, default_grid, Grid, ModelKind, ValidationClasses, ZslDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeAblationConfig {
    /// Attributes kept per setting.
    pub keep_counts: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    /// `None` uses the linear S->V default grid.
    pub grid: Option<Grid>,
    pub validation: ValidationClasses,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeAblationRow {
    pub keep: usize,
    pub mean: f64,
    /// Population standard deviation over runs.
    pub std: f64,
    pub accuracies: Vec<f64>,
}

impl Serialize for ValidationClasses {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ValidationClasses::Count(n) => s.serialize_u64(*n as u64),
            ValidationClasses::Explicit(ids) => ids.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ValidationClasses {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(usize),
            Explicit(Vec<String>),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Count(n) => ValidationClasses::Count(n),
            Repr::Explicit(v) => ValidationClasses::Explicit(v),
        })
    }
}

fn keep_columns(p: &PrototypeSet, cols: &[usize]) -> PrototypeSet {
    let mut out = p.clone();
    out.matrix = p.matrix.select_columns(cols);
    normalize(&out, true)
}

/// For every keep count and run: draws an attribute subset (seeded with
/// `seed + run`), re-normalizes the prototypes, re-selects the regularizer
/// on a validation split that is the same for every run, fits linear S->V
/// on all seen classes and records test top-1.
pub fn attribute_ablation(data: &ZslDataset, config: &AttributeAblationConfig) -> Result<Vec<AttributeAblationRow>> {
    let k = data.k();
    if config.runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    if let Some(&bad) = config.keep_counts.iter().find(|&&n| n == 0 || n > k) {
        return Err(Error::invalid(format!("keep count {bad} outside 1..={k}")));
    }
    if data.test_labels.is_empty() {
        return Err(Error::Empty("attribute ablation needs labeled test samples".into()));
    }
    let grid = config.grid.clone().unwrap_or_else(|| default_grid(ModelKind::LinearS2v));

    config
        .keep_counts
        .iter()
        .map(|&keep| {
            let accuracies: Vec<f64> = (0..config.runs)
                .into_par_iter()
                .map(|run| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(run as u64));
                    let mut cols = rand::seq::index::sample(&mut rng, k, keep).into_vec();
                    cols.sort_unstable();
                    let subset = data.with_prototypes(keep_columns(&data.seen, &cols), keep_columns(&data.unseen, &cols))?;
                    let cv = cross_validate(&subset, ModelKind::LinearS2v, &grid, &config.validation, config.seed)?;
                    let ranks = cv.model.rank_all(&subset.test_features, &subset.unseen)?;
                    topk_accuracy(&ranks, &subset.test_labels, 1)
                })
                .collect::<Result<_>>()?;
            let (mean, std) = mean_std(&accuracies);
            Ok(AttributeAblationRow {
                keep,
                mean,
                std,
                accuracies,
            })
        })
        .collect()
}

/// Plot data: `keep,mean,std`.
pub fn write_attribute_ablation_csv<W: Write>(w: W, rows: &[AttributeAblationRow]) -> Result<()> {
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.keep.to_string(), r.mean.to_string(), r.std.to_string()])
        .collect();
    write_csv(w, &["keep", "mean", "std"], &records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusAblationRow {
    pub removed_fraction: f64,
    pub pieces: usize,
    pub pair_count: usize,
    pub vocabulary_size: usize,
    /// `(k, accuracy)` per requested k.
    pub topk: Vec<(usize, f64)>,
}

/// Runs the whole pipeline on the full corpus and after removing each
/// fraction of pieces. The unablated run always comes first.
pub fn corpus_ablation(inputs: &PipelineInputs, config: &PipelineConfig, fractions: &[f64]) -> Result<Vec<CorpusAblationRow>> {
    let mut all = vec![0.0];
    all.extend(fractions.iter().copied().filter(|&f| f != 0.0));
    all.iter()
        .map(|&f| {
            let run_inputs = if f == 0.0 {
                inputs.clone()
            } else {
                PipelineInputs {
                    collections: ablate_corpus(&inputs.collections, f, config.seed)?,
                    ..inputs.clone()
                }
            };
            let out = run_pipeline(&run_inputs, config)?;
            Ok(CorpusAblationRow {
                removed_fraction: f,
                pieces: out.pieces,
                pair_count: out.pair_count,
                vocabulary_size: out.vocabulary_size,
                topk: out.evaluation.topk,
            })
        })
        .collect()
}

/// One column per removed fraction, one row per quantity.
pub fn write_corpus_ablation_csv<W: Write>(w: W, rows: &[CorpusAblationRow]) -> Result<()> {
    let mut header = vec!["metric".to_owned()];
    header.extend(rows.iter().map(|r| format!("removed_{}", r.removed_fraction)));
    let mut records = vec![
        std::iter::once("pieces".to_owned()).chain(rows.iter().map(|r| r.pieces.to_string())).collect(),
        std::iter::once("pairs".to_owned()).chain(rows.iter().map(|r| r.pair_count.to_string())).collect(),
        std::iter::once("vocabulary".to_owned()).chain(rows.iter().map(|r| r.vocabulary_size.to_string())).collect(),
    ];
    if let Some(first) = rows.first() {
        for (i, (k, _)) in first.topk.iter().enumerate() {
            let mut rec = vec![format!("top{k}")];
            rec.extend(rows.iter().map(|r| r.topk[i].1.to_string()));
            records.push(rec);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(w, &header, &records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::testutil::planted;

    fn cfg(keep: Vec<usize>, runs: usize) -> AttributeAblationConfig {
        AttributeAblationConfig {
            keep_counts: keep,
            runs,
            seed: 5,
            grid: Some(vec![("lambda".into(), vec![0.01, 1.0])]),
            validation: ValidationClasses::Count(2),
        }
    }

    #[test]
    fn full_set_has_zero_spread() {
        let data = planted(1, 4, 8, 4, 6, 5, 0.3);
        let rows = attribute_ablation(&data, &cfg(vec![5, 2], 4)).unwrap();
        assert_eq!(rows[0].std, 0.0);
        assert!(rows[0].accuracies.iter().all(|&a| a == rows[0].accuracies[0]));
        assert_eq!(rows[1].accuracies.len(), 4);
    }

    #[test]
    fn rejects_bad_keep_counts() {
        let data = planted(1, 2, 4, 2, 3, 3, 0.3);
        assert!(attribute_ablation(&data, &cfg(vec![0], 2)).is_err());
        assert!(attribute_ablation(&data, &cfg(vec![4], 2)).is_err());
        assert!(attribute_ablation(&data, &cfg(vec![3], 0)).is_err());
    }

    #[test]
    fn validation_spec_serde() {
        let c = serde_json::to_string(&ValidationClasses::Count(3)).unwrap();
        assert_eq!(c, "3");
        let e: ValidationClasses = serde_json::from_str(r#"["a","b"]"#).unwrap();
        assert_eq!(e, ValidationClasses::Explicit(vec!["a".into(), "b".into()]));
    }

    #[test]
    fn corpus_table_layout() {
        let rows: Vec<CorpusAblationRow> = [0.0, 0.5, 0.75, 0.9]
            .iter()
            .map(|&f| CorpusAblationRow {
                removed_fraction: f,
                pieces: 10,
                pair_count: 20,
                vocabulary_size: 5,
                topk: vec![(1, 0.5), (5, 0.9)],
            })
            .collect();
        let mut buf = Vec::new();
        write_corpus_ablation_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "metric,removed_0,removed_0.5,removed_0.75,removed_0.9");
        assert_eq!(lines.len(), 6);
        assert!(lines.iter().all(|l| l.split(',').count() == 5));
    }
}
