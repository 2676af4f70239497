//! Convex combination of seen-class prototypes weighted by a softmax
//! classifier's top-T probabilities, compared to unseen prototypes by cosine.

use nalgebra::DMatrix;

use super::{rank_scores, Hyper, ModelKind, ZslDataset, ZslModel};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_T: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ConseOptions {
    /// L2 penalty on the weights (the bias is not penalized).
    pub reg: f64,
    pub top_t: usize,
    pub max_iter: usize,
    /// Stop once every gradient entry is below this.
    pub tol: f64,
}

impl Default for ConseOptions {
    fn default() -> Self {
        ConseOptions {
            reg: 1e-3,
            top_t: DEFAULT_TOP_T,
            max_iter: 3000,
            tol: 1e-7,
        }
    }
}

fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

fn softmax_rows(mut z: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in z.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    z
}

/// Class probabilities, N x C_s, for weights `(D+1) x C_s` (bias last).
pub fn softmax_probabilities(weights: &DMatrix<f64>, features: &DMatrix<f64>) -> DMatrix<f64> {
    softmax_rows(with_bias(features) * weights)
}

/// Semantic embedding of every feature row: the probability-weighted mean
/// of the `top_t` most likely seen prototypes.
pub fn conse_embed(weights: &DMatrix<f64>, seen: &DMatrix<f64>, features: &DMatrix<f64>, top_t: usize) -> DMatrix<f64> {
    let probs = softmax_probabilities(weights, features);
    let t = top_t.clamp(1, seen.nrows().max(1));
    let mut out = DMatrix::zeros(features.nrows(), seen.ncols());
    for (i, p) in probs.row_iter().enumerate() {
        let p: Vec<f64> = p.iter().copied().collect();
        let top = &rank_scores(&p)[..t];
        let mass: f64 = top.iter().map(|&c| p[c]).sum();
        let mut row = out.row_mut(i);
        for &c in top {
            row += seen.row(c) * (p[c] / mass);
        }
    }
    out
}

struct Objective<'a> {
    x: DMatrix<f64>,
    labels: &'a [usize],
    reg: f64,
}

impl Objective<'_> {
    fn grad(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.x.nrows() as f64;
        let mut p = softmax_rows(&self.x * w);
        for (i, &y) in self.labels.iter().enumerate() {
            p[(i, y)] -= 1.0;
        }
        let mut g = self.x.tr_mul(&p) / n;
        let d = w.nrows() - 1;
        let mut penalty = w * self.reg;
        penalty.row_mut(d).fill(0.0);
        g += penalty;
        g
    }

    /// Upper bound on the gradient's Lipschitz constant.
    fn lipschitz(&self) -> f64 {
        let gram = self.x.tr_mul(&self.x) / self.x.nrows() as f64;
        let mut v = DMatrix::from_element(gram.nrows(), 1, 1.0);
        let mut lambda = 0.0;
        for _ in 0..200 {
            let next = &gram * &v;
            let norm = next.norm();
            if norm == 0.0 {
                break;
            }
            lambda = norm / v.norm();
            v = next / norm;
        }
        0.5 * lambda * 1.05 + self.reg
    }
}

/// Multinomial logistic regression by accelerated gradient descent from
/// zero weights; deterministic.
pub fn fit_conse(data: &ZslDataset, opts: &ConseOptions) -> Result<ZslModel> {
    if opts.top_t == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    if !(opts.reg >= 0.0) {
        return Err(Error::invalid("regularizer must be non-negative"));
    }
    if data.n() == 0 {
        return Err(Error::Empty("no training samples".into()));
    }
    let obj = Objective {
        x: with_bias(&data.features),
        labels: &data.labels,
        reg: opts.reg,
    };
    let step = 1.0 / obj.lipschitz();
    let mut w = DMatrix::zeros(data.d() + 1, data.seen.len());
    let mut prev = w.clone();
    let mut theta = 1.0f64;
    for _ in 0..opts.max_iter {
        let next_theta = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        let y = &w + (&w - &prev) * ((theta - 1.0) / next_theta);
        let g = obj.grad(&y);
        prev = std::mem::replace(&mut w, &y - g * step);
        theta = next_theta;
        if obj.grad(&w).amax() < opts.tol {
            break;
        }
    }

    let t = opts.top_t.min(data.seen.len());
    let hyper = Hyper::from([("reg".to_owned(), opts.reg), ("T".to_owned(), t as f64)]);
    Ok(ZslModel::new(
        ModelKind::Conse,
        hyper,
        vec![("W", w), ("S_seen", data.seen.matrix.clone())],
    ))
}
