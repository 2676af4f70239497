//! Bilinear model with a closed-form solution:
//! `V = (X'X + gamma I)^-1 X'Y S (S'S + lambda I)^-1`, scored by `x'Vs`.

use nalgebra::DMatrix;

use super::ridge::solve_regularized;
use super::{Hyper, ModelKind, ZslDataset, ZslModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabelEncoding {
    /// +1 for the true class, -1 elsewhere.
    #[default]
    PlusMinus,
    /// +1 for the true class, 0 elsewhere.
    ZeroOne,
}

/// N x C_s label matrix.
pub fn eszsl_label_matrix(labels: &[usize], classes: usize, enc: LabelEncoding) -> DMatrix<f64> {
    let off = match enc {
        LabelEncoding::PlusMinus => -1.0,
        LabelEncoding::ZeroOne => 0.0,
    };
    DMatrix::from_fn(labels.len(), classes, |i, c| if labels[i] == c { 1.0 } else { off })
}

pub fn fit_eszsl(data: &ZslDataset, gamma: f64, lambda: f64, enc: LabelEncoding) -> Result<ZslModel> {
    if !(gamma > 0.0 && lambda > 0.0) {
        return Err(Error::invalid("both regularizers must be positive"));
    }
    if data.n() == 0 {
        return Err(Error::Empty("no training samples".into()));
    }
    let x = &data.features;
    let s = &data.seen.matrix;

    // X'Y from class sums: column c is sum_{y_i = c} x_i (+ off * rest).
    let sums = data.class_sums().transpose();
    let xty = match enc {
        LabelEncoding::ZeroOne => sums,
        LabelEncoding::PlusMinus => {
            let total = x.row_sum().transpose();
            let mut m = sums * 2.0;
            for mut col in m.column_iter_mut() {
                col -= &total;
            }
            m
        }
    };

    let left = solve_regularized(&x.tr_mul(x), &(xty * s), gamma)?;
    // right-multiplying by (S'S + lambda I)^-1: solve the transposed system
    let v = solve_regularized(&s.tr_mul(s), &left.transpose(), lambda)?.transpose();

    let mut hyper = Hyper::from([("gamma".to_owned(), gamma), ("lambda".to_owned(), lambda)]);
    if enc == LabelEncoding::ZeroOne {
        hyper.insert("zero_one".into(), 1.0);
    }
    Ok(ZslModel::new(ModelKind::Eszsl, hyper, vec![("W", v)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::ridge::ridge;
    use crate::zsl::testutil::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_direct_formula() {
        let data = planted(1, 4, 3, 2, 5, 4, 0.5);
        for enc in [LabelEncoding::PlusMinus, LabelEncoding::ZeroOne] {
            let m = fit_eszsl(&data, 0.5, 2.0, enc).unwrap();
            let x = &data.features;
            let s = &data.seen.matrix;
            let y = eszsl_label_matrix(&data.labels, 3, enc);
            let a = (x.transpose() * x + DMatrix::identity(5, 5) * 0.5).try_inverse().unwrap();
            let b = (s.transpose() * s + DMatrix::identity(4, 4) * 2.0).try_inverse().unwrap();
            let v = a * x.transpose() * y * s * b;
            assert!((m.param("W").unwrap() - v).amax() < 1e-10);
        }
    }

    #[test]
    fn scalar_prototype_collapses_to_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 12, 4);
        let data = ZslDataset::new(
            x.clone(),
            vec![0; 12],
            protos("s", DMatrix::from_element(1, 1, 1.0)),
            protos("u", DMatrix::zeros(0, 1)),
        )
        .unwrap();
        let m = fit_eszsl(&data, 0.3, 0.5, LabelEncoding::PlusMinus).unwrap();
        let r = ridge(&x, &DMatrix::from_element(12, 1, 1.0), 0.3).unwrap() / 1.5;
        assert!((m.param("W").unwrap() - r).amax() < 1e-12);
    }

    #[test]
    fn rescaled_prototypes_keep_rankings() {
        let data = planted(2, 5, 4, 3, 6, 3, 0.2);
        let base = fit_eszsl(&data, 1.0, 0.5, LabelEncoding::PlusMinus).unwrap();
        let c = 3.5;
        let mut scaled = data.clone();
        scaled.seen.matrix *= c;
        scaled.unseen.matrix *= c;
        let m = fit_eszsl(&scaled, 1.0, 0.5 * c * c, LabelEncoding::PlusMinus).unwrap();
        assert_eq!(
            base.rank_all(&data.test_features, &data.unseen).unwrap(),
            m.rank_all(&scaled.test_features, &scaled.unseen).unwrap()
        );
    }

    #[test]
    fn rejects_non_positive_regularizers() {
        let data = planted(2, 2, 2, 1, 3, 2, 0.0);
        assert!(fit_eszsl(&data, 0.0, 1.0, LabelEncoding::PlusMinus).is_err());
        assert!(fit_eszsl(&data, 1.0, -1.0, LabelEncoding::PlusMinus).is_err());
    }
}
