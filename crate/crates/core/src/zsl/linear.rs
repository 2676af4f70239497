//! Linear maps between the visual and semantic spaces.

use nalgebra::DMatrix;

use super::ridge::{ridge, solve_regularized};
use super::{Hyper, ModelKind, ZslDataset, ZslModel};
use crate::error::{Error, Result};

fn hyper(lambda: f64) -> Hyper {
    Hyper::from([("lambda".to_owned(), lambda)])
}

fn check(data: &ZslDataset) -> Result<()> {
    if data.n() == 0 {
        return Err(Error::Empty("no training samples".into()));
    }
    Ok(())
}

/// `W` (D x K) regressing each sample onto its class prototype; scored by
/// cosine between `W'x` and the prototype.
pub fn fit_linear_v2s(data: &ZslDataset, lambda: f64) -> Result<ZslModel> {
    check(data)?;
    let w = ridge(&data.features, &data.label_prototypes(), lambda)?;
    Ok(ZslModel::new(ModelKind::LinearV2s, hyper(lambda), vec![("W", w)]))
}

/// `W` (K x D) regressing each class prototype onto the sample's features;
/// scored by cosine in the visual space.
///
/// With at least K samples the K x K normal equations are assembled from
/// per-class counts and sums, so the N x K design is never built.
pub fn fit_linear_s2v(data: &ZslDataset, lambda: f64) -> Result<ZslModel> {
    check(data)?;
    let s = &data.seen.matrix;
    let w = if data.n() >= data.k() {
        let counts = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            s.nrows(),
            data.class_counts().into_iter().map(|c| c as f64),
        ));
        let gram = s.transpose() * &counts * s;
        let rhs = s.transpose() * data.class_sums();
        solve_regularized(&gram, &rhs, lambda)?
    } else {
        ridge(&data.label_prototypes(), &data.features, lambda)?
    };
    Ok(ZslModel::new(ModelKind::LinearS2v, hyper(lambda), vec![("W", w)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::testutil::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_features_interpolate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_matrix(&mut rng, 4, 3);
        let data = ZslDataset::new(DMatrix::identity(4, 4), vec![0, 1, 2, 3], protos("s", s.clone()), protos("u", s.rows(0, 0).into_owned()))
            .unwrap();
        let m = fit_linear_v2s(&data, 0.0).unwrap();
        let w = m.param("W").unwrap();
        assert!((w.transpose() - s.transpose()).amax() < 1e-12);
    }

    #[test]
    fn single_sample_s2v_interpolates() {
        let s = DMatrix::from_row_slice(1, 3, &[0.3, -1.0, 2.0]);
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let data = ZslDataset::new(x.clone(), vec![0], protos("s", s.clone()), protos("u", DMatrix::zeros(0, 3))).unwrap();
        let m = fit_linear_s2v(&data, 0.0).unwrap();
        let pred = &s * m.param("W").unwrap();
        assert!((pred - x).amax() < 1e-12);
    }

    #[test]
    fn aggregated_s2v_matches_explicit_design() {
        let data = planted(2, 7, 5, 2, 6, 3, 0.3);
        let m = fit_linear_s2v(&data, 0.7).unwrap();
        let direct = ridge(&data.label_prototypes(), &data.features, 0.7).unwrap();
        assert!((m.param("W").unwrap() - direct).amax() < 1e-10);
    }

    #[test]
    fn duplicate_prototypes_score_identically() {
        let data = planted(3, 5, 4, 3, 5, 3, 0.1);
        let m = fit_linear_s2v(&data, 0.1).unwrap();
        let mut u = data.unseen.clone();
        let r0 = u.matrix.row(0).into_owned();
        u.matrix.row_mut(1).copy_from(&r0);
        let a = m.scores(&data.test_features, &u.matrix).unwrap();
        let ids = vec![u.class_ids[1].clone(), u.class_ids[0].clone(), u.class_ids[2].clone()];
        let b = m.scores(&data.test_features, &u.select(&ids).unwrap().matrix).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn planted_linear_structure_is_recovered() {
        let data = planted(4, 10, 8, 5, 10, 6, 0.05);
        assert_eq!(top1(&fit_linear_s2v(&data, 0.01).unwrap(), &data), 1.0);
        assert_eq!(top1(&fit_linear_v2s(&data, 0.01).unwrap(), &data), 1.0);
    }
}
