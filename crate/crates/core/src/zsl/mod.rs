//! Zero-shot compatibility models.
//!
//! Every model scores a visual feature `x` against a class prototype `s`;
//! prediction ranks the candidate classes by score. Models are fit on seen
//! classes only and ranked over unseen ones.

mod conse;
mod cv;
mod devise;
mod eszsl;
mod io;
mod linear;
mod ridge;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use self::conse::{conse_embed, fit_conse, softmax_probabilities, ConseOptions, DEFAULT_TOP_T};
pub use self::cv::{
    candidates, cross_validate, default_grid, split_validation, CvResult, Grid, ValidationClasses,
};
pub use self::devise::{fit_devise, fit_devise_from, hinge_grad, DeviseOptions};
pub use self::eszsl::{eszsl_label_matrix, fit_eszsl, LabelEncoding};
pub use self::io::{load_dataset, DatasetPaths};
pub use self::linear::{fit_linear_s2v, fit_linear_v2s};
pub use self::ridge::ridge;
use crate::error::{Error, Result};
use crate::prototypes::PrototypeSet;

/// Training samples of seen classes plus the candidate unseen classes and,
/// optionally, labeled test samples of those unseen classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ZslDataset {
    /// N x D
    pub features: DMatrix<f64>,
    /// Row index into `seen` for every training sample.
    pub labels: Vec<usize>,
    pub seen: PrototypeSet,
    pub unseen: PrototypeSet,
    /// M x D, possibly empty.
    pub test_features: DMatrix<f64>,
    /// Row index into `unseen` for every test sample.
    pub test_labels: Vec<usize>,
}

impl ZslDataset {
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        seen: PrototypeSet,
        unseen: PrototypeSet,
    ) -> Result<Self> {
        let d = features.ncols();
        Self::with_test(features, labels, seen, unseen, DMatrix::zeros(0, d), Vec::new())
    }

    pub fn with_test(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        seen: PrototypeSet,
        unseen: PrototypeSet,
        test_features: DMatrix<f64>,
        test_labels: Vec<usize>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows for {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if test_features.nrows() != test_labels.len() {
            return Err(Error::shape(format!(
                "{} test feature rows for {} test labels",
                test_features.nrows(),
                test_labels.len()
            )));
        }
        if test_features.nrows() > 0 && test_features.ncols() != features.ncols() {
            return Err(Error::shape("train and test features differ in dimension"));
        }
        if !unseen.is_empty() && seen.dim() != unseen.dim() {
            return Err(Error::shape(format!(
                "seen prototypes have dimension {}, unseen {}",
                seen.dim(),
                unseen.dim()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= seen.len()) {
            return Err(Error::invalid(format!("label {bad} outside {} seen classes", seen.len())));
        }
        if let Some(&bad) = test_labels.iter().find(|&&l| l >= unseen.len()) {
            return Err(Error::invalid(format!("test label {bad} outside {} unseen classes", unseen.len())));
        }
        if let Some(c) = seen.class_ids.iter().find(|c| unseen.class_ids.contains(c)) {
            return Err(Error::invalid(format!("class {c:?} is both seen and unseen")));
        }
        Ok(ZslDataset {
            features,
            labels,
            seen,
            unseen,
            test_features,
            test_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn k(&self) -> usize {
        self.seen.dim()
    }

    /// Training samples per seen class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.seen.len()];
        for &l in &self.labels {
            n[l] += 1;
        }
        n
    }

    /// Sum of training features per seen class, C_s x D.
    pub fn class_sums(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.seen.len(), self.d());
        for (i, &l) in self.labels.iter().enumerate() {
            let mut row = m.row_mut(l);
            row += self.features.row(i);
        }
        m
    }

    /// Prototype of every training sample's class, N x K.
    pub fn label_prototypes(&self) -> DMatrix<f64> {
        self.seen.matrix.select_rows(&self.labels)
    }

    /// Same prototypes with a new test part.
    pub fn replace_test(&self, features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        Self::with_test(
            self.features.clone(),
            self.labels.clone(),
            self.seen.clone(),
            self.unseen.clone(),
            features,
            labels,
        )
    }

    /// Prototypes replaced (for example by an attribute subset); class ids
    /// must match.
    pub fn with_prototypes(&self, seen: PrototypeSet, unseen: PrototypeSet) -> Result<Self> {
        if seen.class_ids != self.seen.class_ids || unseen.class_ids != self.unseen.class_ids {
            return Err(Error::invalid("replacement prototypes must keep the class order"));
        }
        Self::with_test(
            self.features.clone(),
            self.labels.clone(),
            seen,
            unseen,
            self.test_features.clone(),
            self.test_labels.clone(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearV2s,
    LinearS2v,
    Eszsl,
    Conse,
    Devise,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::LinearV2s,
        ModelKind::LinearS2v,
        ModelKind::Eszsl,
        ModelKind::Conse,
        ModelKind::Devise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearV2s => "linear_v2s",
            ModelKind::LinearS2v => "linear_s2v",
            ModelKind::Eszsl => "eszsl",
            ModelKind::Conse => "conse",
            ModelKind::Devise => "devise",
        }
    }

    /// Whether prototypes are l2-normalized unless asked otherwise.
    pub fn normalizes_by_default(self) -> bool {
        self != ModelKind::Eszsl
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model {s:?}; expected one of linear_v2s, linear_s2v, eszsl, conse, devise")))
    }
}

pub type Hyper = BTreeMap<String, f64>;

/// A fitted model: its kind, the hyperparameters it was fit with and its
/// parameter matrices by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ZslModel {
    pub kind: ModelKind,
    pub hyper: Hyper,
    pub params: BTreeMap<String, DMatrix<f64>>,
}

impl ZslModel {
    pub(crate) fn new(kind: ModelKind, hyper: Hyper, params: Vec<(&str, DMatrix<f64>)>) -> Self {
        ZslModel {
            kind,
            hyper,
            params: params.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        }
    }

    pub fn param(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.params
            .get(name)
            .ok_or_else(|| Error::invalid(format!("{} model has no parameter {name:?}", self.kind)))
    }

    pub fn hyper(&self, name: &str) -> Result<f64> {
        self.hyper
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("{} model has no hyperparameter {name:?}", self.kind)))
    }

    /// Visual dimension D and semantic dimension K the model expects.
    pub fn dims(&self) -> Result<(usize, usize)> {
        Ok(match self.kind {
            ModelKind::LinearV2s | ModelKind::Eszsl | ModelKind::Devise => {
                let w = self.param("W")?;
                (w.nrows(), w.ncols())
            }
            ModelKind::LinearS2v => {
                let w = self.param("W")?;
                (w.ncols(), w.nrows())
            }
            ModelKind::Conse => (self.param("W")?.nrows() - 1, self.param("S_seen")?.ncols()),
        })
    }

    /// Scores of every feature row against every prototype row, N x C.
    pub fn scores(&self, features: &DMatrix<f64>, protos: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (d, k) = self.dims()?;
        if features.ncols() != d {
            return Err(Error::shape(format!("features have dimension {}, model expects {d}", features.ncols())));
        }
        if protos.ncols() != k {
            return Err(Error::shape(format!("prototypes have dimension {}, model expects {k}", protos.ncols())));
        }
        Ok(match self.kind {
            ModelKind::LinearV2s => cosine_scores(&(features * self.param("W")?), protos),
            ModelKind::LinearS2v => cosine_scores(features, &(protos * self.param("W")?)),
            ModelKind::Eszsl | ModelKind::Devise => features * self.param("W")? * protos.transpose(),
            ModelKind::Conse => {
                let t = self.hyper("T")? as usize;
                let emb = conse_embed(self.param("W")?, self.param("S_seen")?, features, t);
                cosine_scores(&emb, protos)
            }
        })
    }

    /// Class indices of `protos` ranked for every feature row.
    pub fn rank_all(&self, features: &DMatrix<f64>, protos: &PrototypeSet) -> Result<Vec<Vec<usize>>> {
        let s = self.scores(features, &protos.matrix)?;
        Ok(s.row_iter()
            .map(|r| rank_scores(&r.iter().copied().collect::<Vec<_>>()))
            .collect())
    }
}

/// Ranked `(class index, score)` list for one feature vector.
pub fn predict_rank(model: &ZslModel, x: &DVector<f64>, protos: &PrototypeSet) -> Result<Vec<(usize, f64)>> {
    let row = DMatrix::from_row_slice(1, x.len(), x.as_slice());
    let s = model.scores(&row, &protos.matrix)?;
    let scores: Vec<f64> = s.row(0).iter().copied().collect();
    Ok(rank_scores(&scores).into_iter().map(|c| (c, scores[c])).collect())
}

/// Indices by descending score; ties keep the lower index first.
pub fn rank_scores(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Row-wise cosine similarity, N x C. Zero rows score 0 against everything.
pub fn cosine_scores(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let unit = |m: &DMatrix<f64>| {
        let mut m = m.clone();
        for mut r in m.row_iter_mut() {
            let n = r.norm();
            if n > 0.0 {
                r /= n;
            }
        }
        m
    };
    unit(a) * unit(b).transpose()
}

/// Fits `kind` with the given hyperparameters; missing ones take defaults.
pub fn fit(kind: ModelKind, data: &ZslDataset, hyper: &Hyper, seed: u64) -> Result<ZslModel> {
    let get = |name: &str, default: f64| hyper.get(name).copied().unwrap_or(default);
    match kind {
        ModelKind::LinearV2s => fit_linear_v2s(data, get("lambda", 1.0)),
        ModelKind::LinearS2v => fit_linear_s2v(data, get("lambda", 1.0)),
        ModelKind::Eszsl => {
            let enc = if get("zero_one", 0.0) != 0.0 {
                LabelEncoding::ZeroOne
            } else {
                LabelEncoding::PlusMinus
            };
            fit_eszsl(data, get("gamma", 1.0), get("lambda", 1.0), enc)
        }
        ModelKind::Conse => {
            let opts = ConseOptions {
                reg: get("reg", 1e-3),
                top_t: get("T", DEFAULT_TOP_T as f64) as usize,
                ..ConseOptions::default()
            };
            fit_conse(data, &opts)
        }
        ModelKind::Devise => {
            let d = DeviseOptions::default();
            let opts = DeviseOptions {
                margin: get("margin", d.margin),
                lr: get("lr", d.lr),
                epochs: get("epochs", d.epochs as f64) as usize,
                sum_violators: get("sum_violators", 0.0) != 0.0,
                seed,
            };
            fit_devise(data, &opts)
        }
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_order_and_ties() {
        assert_eq!(rank_scores(&[0.9, 0.1]), [0, 1]);
        assert_eq!(rank_scores(&[0.1, 0.9]), [1, 0]);
        assert_eq!(rank_scores(&[0.5, 0.7, 0.5, 0.7]), [1, 3, 0, 2]);
    }

    #[test]
    fn dataset_validation() {
        let p = protos("s", DMatrix::identity(2, 2));
        let u = protos("u", DMatrix::identity(2, 2));
        let x = DMatrix::zeros(3, 4);
        assert!(ZslDataset::new(x.clone(), vec![0, 1, 2], p.clone(), u.clone()).is_err());
        assert!(ZslDataset::new(x.clone(), vec![0, 1], p.clone(), u.clone()).is_err());
        assert!(ZslDataset::new(x.clone(), vec![0, 1, 1], p.clone(), p.clone()).is_err());
        let d = ZslDataset::new(x, vec![0, 1, 1], p, u).unwrap();
        assert_eq!(d.class_counts(), [1, 2]);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("sync".parse::<ModelKind>().is_err());
    }

    #[test]
    fn predict_rank_checks_dimensions() {
        let data = planted(1, 5, 3, 2, 4, 3, 0.0);
        let m = fit_linear_s2v(&data, 0.1).unwrap();
        let bad = DVector::zeros(5);
        assert!(matches!(predict_rank(&m, &bad, &data.unseen), Err(Error::Shape(_))));
        let x = DVector::from_iterator(4, data.test_features.row(0).iter().copied());
        let r = predict_rank(&m, &x, &data.unseen).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r[0].1 >= r[1].1);
    }

    fn fitted(kind: ModelKind) -> (ZslModel, ZslDataset) {
        let data = planted(3, 6, 4, 3, 5, 4, 0.1);
        let mut h = Hyper::new();
        h.insert("epochs".into(), 3.0);
        (fit(kind, &data, &h, 9).unwrap(), data)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn positive_scaling_keeps_rankings(kind_ix in 0usize..5, c in 0.01f64..100.0) {
            let (m, data) = fitted(ModelKind::ALL[kind_ix]);
            let a = m.rank_all(&data.test_features, &data.unseen).unwrap();
            let mut scaled = data.unseen.clone();
            scaled.matrix *= c;
            let b = m.rank_all(&data.test_features, &scaled).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn permuting_classes_permutes_rankings(kind_ix in 0usize..5, rot in 1usize..3) {
            let (m, data) = fitted(ModelKind::ALL[kind_ix]);
            let c = data.unseen.len();
            let perm: Vec<usize> = (0..c).map(|i| (i + rot) % c).collect();
            let ids: Vec<String> = perm.iter().map(|&i| data.unseen.class_ids[i].clone()).collect();
            let permuted = data.unseen.select(&ids).unwrap();
            let a = m.scores(&data.test_features, &data.unseen.matrix).unwrap();
            let b = m.scores(&data.test_features, &permuted.matrix).unwrap();
            for (j, &src) in perm.iter().enumerate() {
                for i in 0..a.nrows() {
                    prop_assert_eq!(a[(i, src)], b[(i, j)]);
                }
            }
        }
    }
}
