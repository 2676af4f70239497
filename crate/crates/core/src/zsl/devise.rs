//! Bilinear model trained with a hinge rank loss: for a sample of class
//! `y` and another seen class `c`, the loss is
//! `max(0, margin - x'W s_y + x'W s_c)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Hyper, ModelKind, ZslDataset, ZslModel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DeviseOptions {
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Update on every violating class instead of stopping at the first.
    pub sum_violators: bool,
    pub seed: u64,
}

impl Default for DeviseOptions {
    fn default() -> Self {
        DeviseOptions {
            margin: 0.1,
            lr: 0.001,
            epochs: 10,
            sum_violators: false,
            seed: 1,
        }
    }
}

/// Hinge loss of one triplet and its gradient with respect to `W` (D x K);
/// `None` when the margin is satisfied.
pub fn hinge_grad(
    w: &DMatrix<f64>,
    x: &DVector<f64>,
    s_pos: &DVector<f64>,
    s_neg: &DVector<f64>,
    margin: f64,
) -> Option<(f64, DMatrix<f64>)> {
    let wx = w.tr_mul(x);
    let loss = margin - wx.dot(s_pos) + wx.dot(s_neg);
    (loss > 0.0).then(|| (loss, x * (s_neg - s_pos).transpose()))
}

/// Trains from a small seeded random initialization.
pub fn fit_devise(data: &ZslDataset, opts: &DeviseOptions) -> Result<ZslModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = 1.0 / ((data.d() * data.k()) as f64).sqrt();
    let init = DMatrix::from_fn(data.d(), data.k(), |_, _| rng.random_range(-scale..scale));
    fit_devise_from(data, init, opts)
}

pub fn fit_devise_from(data: &ZslDataset, init: DMatrix<f64>, opts: &DeviseOptions) -> Result<ZslModel> {
    if !(opts.margin > 0.0) {
        return Err(Error::invalid("margin must be positive"));
    }
    if !(opts.lr > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    if init.shape() != (data.d(), data.k()) {
        return Err(Error::shape(format!(
            "initial weights are {:?}, expected {:?}",
            init.shape(),
            (data.d(), data.k())
        )));
    }
    let mut w = init;
    let c = data.seen.len();
    let protos: Vec<DVector<f64>> = data.seen.matrix.row_iter().map(|r| r.transpose()).collect();
    let samples: Vec<DVector<f64>> = data.features.row_iter().map(|r| r.transpose()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut negatives: Vec<usize> = Vec::with_capacity(c);
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let y = data.labels[i];
            negatives.clear();
            negatives.extend((0..c).filter(|&k| k != y));
            negatives.shuffle(&mut rng);
            let mut total: Option<DMatrix<f64>> = None;
            for &neg in &negatives {
                if let Some((_, g)) = hinge_grad(&w, &samples[i], &protos[y], &protos[neg], opts.margin) {
                    match &mut total {
                        Some(t) => *t += g,
                        None => total = Some(g),
                    }
                    if !opts.sum_violators {
                        break;
                    }
                }
            }
            if let Some(g) = total {
                w -= g * opts.lr;
            }
        }
    }

    let mut hyper = Hyper::from([
        ("margin".to_owned(), opts.margin),
        ("lr".to_owned(), opts.lr),
        ("epochs".to_owned(), opts.epochs as f64),
    ]);
    if opts.sum_violators {
        hyper.insert("sum_violators".into(), 1.0);
    }
    Ok(ZslModel::new(ModelKind::Devise, hyper, vec![("W", w)]))
}
