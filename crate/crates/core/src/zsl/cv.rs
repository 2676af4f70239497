//! Hyperparameter selection with held-out seen classes standing in for
//! unseen ones.

use log::{debug, warn};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{fit, Hyper, ModelKind, ZslDataset, ZslModel};
use crate::error::{Error, Result};

/// Hyperparameter name and the values to try.
pub type Grid = Vec<(String, Vec<f64>)>;

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationClasses {
    /// This many seen classes drawn at random from the seed.
    Count(usize),
    Explicit(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best: Hyper,
    pub best_accuracy: f64,
    /// Validation top-1 of every candidate that could be fit, in grid order.
    pub table: Vec<(Hyper, f64)>,
    pub validation_classes: Vec<String>,
    /// Refit on all seen classes with `best`.
    pub model: ZslModel,
}

fn powers_of_ten() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

pub fn default_grid(kind: ModelKind) -> Grid {
    let g = |names: &[&str]| names.iter().map(|n| (n.to_string(), powers_of_ten())).collect();
    match kind {
        ModelKind::LinearV2s | ModelKind::LinearS2v => g(&["lambda"]),
        ModelKind::Eszsl => g(&["gamma", "lambda"]),
        ModelKind::Conse => g(&["reg"]),
        ModelKind::Devise => vec![("epochs".into(), vec![5.0, 10.0, 20.0, 40.0])],
    }
}

/// Cartesian product of the grid in ascending lexicographic order, so the
/// first candidate among equals has the smallest regularizers.
pub fn candidates(grid: &Grid) -> Result<Vec<Hyper>> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    let mut out = vec![Hyper::new()];
    for (name, values) in grid {
        let mut values = values.clone();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("grid for {name:?} has a non-finite value")));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        out = out
            .into_iter()
            .flat_map(|h| {
                values.iter().map(move |&v| {
                    let mut h = h.clone();
                    h.insert(name.clone(), v);
                    h
                })
            })
            .collect();
    }
    Ok(out)
}

/// Splits seen classes into a training part and validation classes that
/// play the unseen role. Returns the split dataset and the validation ids.
pub fn split_validation(data: &ZslDataset, val: &ValidationClasses, seed: u64) -> Result<(ZslDataset, Vec<String>)> {
    let cs = data.seen.len();
    let mut chosen: Vec<usize> = match val {
        ValidationClasses::Count(n) => {
            if *n == 0 || *n >= cs {
                return Err(Error::invalid(format!(
                    "need 1 <= validation classes < {cs} seen classes, got {n}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, cs, *n).into_vec()
        }
        ValidationClasses::Explicit(ids) => ids
            .iter()
            .map(|id| {
                data.seen
                    .position(id)
                    .ok_or_else(|| Error::invalid(format!("validation class {id:?} is not seen")))
            })
            .collect::<Result<_>>()?,
    };
    chosen.sort_unstable();
    chosen.dedup();
    if chosen.is_empty() || chosen.len() >= cs {
        return Err(Error::invalid("validation must leave at least one training class"));
    }

    let is_val: Vec<bool> = (0..cs).map(|c| chosen.contains(&c)).collect();
    let train_classes: Vec<usize> = (0..cs).filter(|&c| !is_val[c]).collect();
    let remap = |classes: &[usize]| {
        let mut m = vec![usize::MAX; cs];
        for (i, &c) in classes.iter().enumerate() {
            m[c] = i;
        }
        m
    };
    let (train_map, val_map) = (remap(&train_classes), remap(&chosen));

    let (mut tr_rows, mut tr_labels, mut va_rows, mut va_labels) = (vec![], vec![], vec![], vec![]);
    for (i, &l) in data.labels.iter().enumerate() {
        if is_val[l] {
            va_rows.push(i);
            va_labels.push(val_map[l]);
        } else {
            tr_rows.push(i);
            tr_labels.push(train_map[l]);
        }
    }
    if va_rows.is_empty() {
        return Err(Error::Empty("validation classes have no samples".into()));
    }
    let ids = |cs: &[usize]| -> Vec<String> { cs.iter().map(|&c| data.seen.class_ids[c].clone()).collect() };
    let val_ids = ids(&chosen);
    let split = ZslDataset::with_test(
        data.features.select_rows(&tr_rows),
        tr_labels,
        data.seen.select(&ids(&train_classes))?,
        data.seen.select(&val_ids)?,
        data.features.select_rows(&va_rows),
        va_labels,
    )?;
    Ok((split, val_ids))
}

pub(crate) fn top1_accuracy(model: &ZslModel, features: &DMatrix<f64>, labels: &[usize], protos: &crate::prototypes::PrototypeSet) -> Result<f64> {
    let ranks = model.rank_all(features, protos)?;
    let hits = ranks.iter().zip(labels).filter(|(r, &l)| r.first() == Some(&l)).count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}

/// Picks the best grid point on held-out seen classes, then refits on all
/// seen classes. Ties go to the earliest candidate in [`candidates`] order.
pub fn cross_validate(
    data: &ZslDataset,
    kind: ModelKind,
    grid: &Grid,
    val: &ValidationClasses,
    seed: u64,
) -> Result<CvResult> {
    let cands = candidates(grid)?;
    let (split, validation_classes) = split_validation(data, val, seed)?;

    let results: Vec<Option<f64>> = cands
        .par_iter()
        .map(|h| {
            let acc = fit(kind, &split, h, seed)
                .and_then(|m| top1_accuracy(&m, &split.test_features, &split.test_labels, &split.unseen));
            match acc {
                Ok(a) => Some(a),
                Err(e) => {
                    warn!("{kind} candidate {h:?} skipped: {e}");
                    None
                }
            }
        })
        .collect();

    let table: Vec<(Hyper, f64)> = cands
        .into_iter()
        .zip(results)
        .filter_map(|(h, a)| a.map(|a| (h, a)))
        .collect();
    let (best, best_accuracy) = table
        .iter()
        .fold(None::<&(Hyper, f64)>, |acc, cand| match acc {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .cloned()
        .ok_or_else(|| Error::invalid(format!("no {kind} grid candidate could be fit")))?;
    debug!("{kind}: best {best:?} with validation top-1 {best_accuracy:.4}");

    let model = fit(kind, data, &best, seed)?;
    Ok(CvResult {
        best,
        best_accuracy,
        table,
        validation_classes,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::testutil::*;

    #[test]
    fn candidate_order() {
        let grid = vec![("b".to_string(), vec![10.0, 1.0]), ("a".to_string(), vec![2.0, 1.0, 2.0])];
        let c = candidates(&grid).unwrap();
        let pairs: Vec<(f64, f64)> = c.iter().map(|h| (h["b"], h["a"])).collect();
        assert_eq!(pairs, [(1.0, 1.0), (1.0, 2.0), (10.0, 1.0), (10.0, 2.0)]);
        assert!(candidates(&vec![]).is_err());
        assert!(candidates(&vec![("x".into(), vec![])]).is_err());
    }

    #[test]
    fn single_point_grid_returns_it() {
        let data = planted(1, 4, 6, 2, 5, 3, 0.3);
        let grid = vec![("lambda".to_string(), vec![0.25])];
        let r = cross_validate(&data, ModelKind::LinearS2v, &grid, &ValidationClasses::Count(2), 3).unwrap();
        assert_eq!(r.best["lambda"], 0.25);
        assert_eq!(r.model.hyper("lambda").unwrap(), 0.25);
        assert_eq!(r.model.param("W").unwrap().ncols(), 5);
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let data = planted(2, 3, 8, 2, 4, 3, 0.3);
        let (a, ida) = split_validation(&data, &ValidationClasses::Count(3), 11).unwrap();
        let (b, idb) = split_validation(&data, &ValidationClasses::Count(3), 11).unwrap();
        assert_eq!(ida, idb);
        assert_eq!(a, b);
        assert_eq!(a.seen.len(), 5);
        assert_eq!(a.test_labels.len(), 9);
        assert!(a.seen.class_ids.iter().all(|c| !ida.contains(c)));
        let (_, ex) = split_validation(&data, &ValidationClasses::Explicit(vec!["s7".into(), "s1".into()]), 0).unwrap();
        assert_eq!(ex, ["s1", "s7"]);
        assert!(split_validation(&data, &ValidationClasses::Count(8), 0).is_err());
        assert!(split_validation(&data, &ValidationClasses::Explicit(vec!["u0".into()]), 0).is_err());
    }

    #[test]
    fn ties_prefer_smallest_regularizer() {
        // noiseless planted data: every small lambda is perfect
        let data = planted(3, 5, 8, 2, 6, 4, 0.0);
        let grid = vec![("lambda".to_string(), vec![1e-2, 1e-3, 1e-1])];
        let r = cross_validate(&data, ModelKind::LinearS2v, &grid, &ValidationClasses::Count(3), 1).unwrap();
        assert_eq!(r.best_accuracy, 1.0);
        assert_eq!(r.best["lambda"], 1e-3);
    }

    /// Bayesian linear model with unit weight prior and unit noise, so the
    /// posterior mean is the ridge solution at lambda = 1. With as many
    /// training classes as prototype dimensions the unregularized fit is
    /// nearly singular and heavy shrinkage discards the signal.
    #[test]
    fn planted_regularizer_is_selected() {
        use rand_distr::{Distribution, StandardNormal};
        let (k, d, cs) = (40, 20, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = |r, c| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let w = g(k, d);
        let s = g(cs, k);
        let x = &s * w + g(cs, d);
        let data = ZslDataset::new(x, (0..cs).collect(), protos("s", s), protos("u", DMatrix::zeros(0, k))).unwrap();
        let grid = vec![("lambda".to_string(), vec![0.01, 1.0, 100.0])];
        let val = ValidationClasses::Count(60);
        let r = cross_validate(&data, ModelKind::LinearS2v, &grid, &val, 4).unwrap();
        // exhaustive check of the same split
        let (split, _) = split_validation(&data, &val, 4).unwrap();
        let accs: Vec<f64> = [0.01, 1.0, 100.0]
            .iter()
            .map(|&l| {
                let m = crate::zsl::fit_linear_s2v(&split, l).unwrap();
                top1_accuracy(&m, &split.test_features, &split.test_labels, &split.unseen).unwrap()
            })
            .collect();
        assert_eq!(r.table.iter().map(|t| t.1).collect::<Vec<_>>(), accs);
        assert_eq!(r.best["lambda"], 1.0, "validation accuracies {accs:?}");
    }
}
