//! In-memory end-to-end run: collections to pairs, embeddings, prototypes,
//! a cross-validated zero-shot model and its test accuracy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::{per_class_accuracy, topk_accuracy, PerClassAccuracy};
use crate::corpus::{build_vocabulary, ConceptCollection};
use crate::error::{Error, Result};
use crate::pairs::{extract_pairs, DedupConfig, PairMode};
use crate::prototypes::{build_prototypes, normalize, ClassNameEntry, PrototypeSet};
use crate::sgns::{train, TrainerConfig};
use crate::synth::SynthCorpus;
use crate::zsl::{cross_validate, default_grid, Grid, Hyper, ModelKind, ValidationClasses, ZslDataset};

/// Everything a run consumes besides its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineInputs {
    pub collections: Vec<ConceptCollection>,
    pub class_names: Vec<ClassNameEntry>,
    pub seen: Vec<String>,
    pub unseen: Vec<String>,
    pub train_features: DMatrix<f64>,
    pub train_labels: Vec<String>,
    pub test_features: DMatrix<f64>,
    pub test_labels: Vec<String>,
}

impl PipelineInputs {
    pub fn from_synth(corpus: &SynthCorpus, stopwords: &crate::corpus::StopWords) -> Result<Self> {
        Ok(PipelineInputs {
            collections: corpus.collections(stopwords)?,
            class_names: corpus.class_names.clone(),
            seen: corpus.seen.clone(),
            unseen: corpus.unseen.clone(),
            train_features: corpus.train_features.clone(),
            train_labels: corpus.train_labels.clone(),
            test_features: corpus.test_features.clone(),
            test_labels: corpus.test_labels.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: PairMode,
    pub trainer: TrainerConfig,
    pub model: ModelKind,
    /// l2-normalize prototypes; `None` uses the model's default.
    pub normalize: Option<bool>,
    /// `None` uses the model's default grid.
    pub grid: Option<Grid>,
    pub validation_classes: usize,
    pub topk: Vec<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: PairMode::Voted,
            trainer: TrainerConfig::default(),
            model: ModelKind::LinearS2v,
            normalize: None,
            grid: None,
            validation_classes: 2,
            topk: vec![1, 5, 10],
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub pieces: usize,
    pub vocabulary_size: usize,
    pub pair_count: usize,
    pub unresolved_classes: Vec<String>,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

impl PipelineOutcome {
    pub fn top1(&self) -> f64 {
        self.evaluation.top1()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub best_hyper: Hyper,
    pub validation_accuracy: f64,
    /// `(k, accuracy)` per requested k.
    pub topk: Vec<(usize, f64)>,
    pub per_class: PerClassAccuracy,
    /// Ranked unseen-class indices per test sample.
    pub rankings: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn top1(&self) -> f64 {
        self.topk.iter().find(|(k, _)| *k == 1).map(|t| t.1).unwrap_or(0.0)
    }
}

fn positions(ids: &[String], labels: &[String], what: &str) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            ids.iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::invalid(format!("{what} label {l:?} is not a listed class")))
        })
        .collect()
}

/// Prototypes for seen and unseen classes, in list order.
pub fn split_prototypes(all: &PrototypeSet, seen: &[String], unseen: &[String]) -> Result<(PrototypeSet, PrototypeSet)> {
    Ok((all.select(seen)?, all.select(unseen)?))
}

/// Assembles a dataset from prototypes and labeled features.
pub fn assemble_dataset(inputs: &PipelineInputs, protos: &PrototypeSet) -> Result<ZslDataset> {
    let (seen, unseen) = split_prototypes(protos, &inputs.seen, &inputs.unseen)?;
    ZslDataset::with_test(
        inputs.train_features.clone(),
        positions(&inputs.seen, &inputs.train_labels, "training")?,
        seen,
        unseen,
        inputs.test_features.clone(),
        positions(&inputs.unseen, &inputs.test_labels, "test")?,
    )
}

/// Cross-validates and fits on the dataset, then evaluates on its test part.
pub fn evaluate_dataset(data: &ZslDataset, config: &PipelineConfig) -> Result<Evaluation> {
    let grid = config.grid.clone().unwrap_or_else(|| default_grid(config.model));
    let cv = cross_validate(
        data,
        config.model,
        &grid,
        &ValidationClasses::Count(config.validation_classes),
        config.seed,
    )?;
    let rankings = cv.model.rank_all(&data.test_features, &data.unseen)?;
    let topk = config
        .topk
        .iter()
        .map(|&k| Ok((k, topk_accuracy(&rankings, &data.test_labels, k)?)))
        .collect::<Result<_>>()?;
    let per_class = per_class_accuracy(&rankings, &data.test_labels, data.unseen.len())?;
    Ok(Evaluation {
        best_hyper: cv.best,
        validation_accuracy: cv.best_accuracy,
        topk,
        per_class,
        rankings,
    })
}

pub fn run_pipeline(inputs: &PipelineInputs, config: &PipelineConfig) -> Result<PipelineOutcome> {
    let vocab = build_vocabulary(&inputs.collections, config.trainer.min_count)?;
    let pairs = extract_pairs(&inputs.collections, &vocab, config.mode, &DedupConfig::default())?;
    let trainer = TrainerConfig {
        seed: config.seed,
        ..config.trainer.clone()
    };
    let embeddings = train(&pairs, &vocab, &trainer)?;
    let raw = build_prototypes(&inputs.class_names, &embeddings)?;
    let protos = normalize(&raw, config.normalize.unwrap_or(config.model.normalizes_by_default()));
    let data = assemble_dataset(inputs, &protos)?;
    let evaluation = evaluate_dataset(&data, config)?;
    Ok(PipelineOutcome {
        pieces: inputs.collections.iter().map(|c| c.pieces.len()).sum(),
        vocabulary_size: vocab.len(),
        pair_count: pairs.len(),
        unresolved_classes: raw.unresolved,
        evaluation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StopWords;
    use crate::synth::{synth_corpus, SynthConfig};

    fn quick_config() -> PipelineConfig {
        PipelineConfig {
            trainer: TrainerConfig {
                min_count: 1,
                dim: 16,
                epochs: 3,
                sample: 0.0,
                lr: 0.05,
                ..TrainerConfig::default()
            },
            topk: vec![1, 2],
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn runs_end_to_end_deterministically() {
        let s = synth_corpus(&SynthConfig { concepts: 8, seen: 4, groups: 2, users: 60, pieces_per_concept: 40, ..SynthConfig::default() })
            .unwrap();
        let inputs = PipelineInputs::from_synth(&s, &StopWords::english()).unwrap();
        let a = run_pipeline(&inputs, &quick_config()).unwrap();
        let b = run_pipeline(&inputs, &quick_config()).unwrap();
        assert_eq!(a, b);
        let e = &a.evaluation;
        assert_eq!(e.topk.len(), 2);
        assert!(e.topk[0].1 <= e.topk[1].1);
        assert_eq!(e.rankings.len(), inputs.test_labels.len());
        assert!(a.unresolved_classes.is_empty());
    }
}
