//! Accuracy metrics, hierarchy diagnostics, correlations and ablations.
//!
//! Rankings are per-sample lists of candidate class indices, best first, as
//! produced by [`crate::zsl::ZslModel::rank_all`]; labels index the same
//! candidate list.

mod ablation;
mod report;
mod taxonomy;

use serde::{Deserialize, Serialize};

pub use self::ablation::{
    attribute_ablation, corpus_ablation, write_attribute_ablation_csv, write_corpus_ablation_csv,
    AttributeAblationConfig, AttributeAblationRow, CorpusAblationRow,
};
pub use self::report::{config_hash, write_csv, Manifest};
pub use self::taxonomy::{
    class_difficulty, distance_histogram, shortest_path_distance, ClassDifficulty, Taxonomy,
};
use crate::error::{Error, Result};

/// Fraction of samples whose label is among the first `k` ranked classes.
/// An empty sample set scores 0.
pub fn topk_accuracy(rankings: &[Vec<usize>], labels: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    check_lengths(rankings, labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = rankings
        .iter()
        .zip(labels)
        .filter(|(r, l)| r.iter().take(k).any(|c| c == *l))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

fn check_lengths(rankings: &[Vec<usize>], labels: &[usize]) -> Result<()> {
    if rankings.len() != labels.len() {
        return Err(Error::shape(format!("{} rankings for {} labels", rankings.len(), labels.len())));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerClassAccuracy {
    /// Top-1 accuracy of every class with at least one sample, by index.
    pub per_class: Vec<(usize, f64)>,
    /// Mean of `per_class`.
    pub macro_average: f64,
    /// Classes without samples, excluded from the average.
    pub empty_classes: Vec<usize>,
}

pub fn per_class_accuracy(rankings: &[Vec<usize>], labels: &[usize], num_classes: usize) -> Result<PerClassAccuracy> {
    check_lengths(rankings, labels)?;
    let mut hits = vec![0usize; num_classes];
    let mut totals = vec![0usize; num_classes];
    for (r, &l) in rankings.iter().zip(labels) {
        if l >= num_classes {
            return Err(Error::invalid(format!("label {l} outside {num_classes} classes")));
        }
        totals[l] += 1;
        if r.first() == Some(&l) {
            hits[l] += 1;
        }
    }
    let per_class: Vec<(usize, f64)> = (0..num_classes)
        .filter(|&c| totals[c] > 0)
        .map(|c| (c, hits[c] as f64 / totals[c] as f64))
        .collect();
    let macro_average = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|(_, a)| a).sum::<f64>() / per_class.len() as f64
    };
    Ok(PerClassAccuracy {
        per_class,
        macro_average,
        empty_classes: (0..num_classes).filter(|&c| totals[c] == 0).collect(),
    })
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::shape(format!("{} xs for {} ys", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("correlation needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation is undefined for a constant series"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    match values {
        [] => return (0.0, 0.0),
        [first, rest @ ..] if rest.iter().all(|v| v == first) => return (*first, 0.0),
        _ => {}
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
