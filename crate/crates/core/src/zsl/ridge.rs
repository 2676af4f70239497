//! Ridge regression through the normal equations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Diagonal ratio of the Cholesky factor below which a system without
/// regularization is treated as singular.
const PIVOT_RATIO: f64 = 1e-7;

/// Solves `(G + lambda I) W = R` for symmetric positive semidefinite `G`.
pub(crate) fn solve_regularized(g: &DMatrix<f64>, r: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("regularizer must be a finite non-negative number"));
    }
    let n = g.nrows();
    let mut a = g.clone();
    for i in 0..n {
        a[(i, i)] += lambda;
    }
    let singular = || {
        Error::Singular(if lambda == 0.0 {
            "normal equations are singular; use a positive regularizer".into()
        } else {
            "normal equations are not positive definite".into()
        })
    };
    let chol = a.cholesky().ok_or_else(singular)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lambda == 0.0 && n > 0 && lo <= PIVOT_RATIO * hi {
        return Err(singular());
    }
    Ok(chol.solve(r))
}

/// Minimizes `||A W - B||_F^2 + lambda ||W||_F^2` over `W` (P x Q).
///
/// Uses the P x P primal system when N >= P and the N x N dual
/// `W = A' (A A' + lambda I)^-1 B` otherwise, which also gives the
/// minimum-norm interpolant at `lambda = 0` for underdetermined systems.
pub fn ridge(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::shape(format!("ridge: {} design rows for {} targets", a.nrows(), b.nrows())));
    }
    if a.nrows() == 0 {
        return Err(Error::Empty("ridge regression needs at least one sample".into()));
    }
    if a.nrows() >= a.ncols() {
        solve_regularized(&a.tr_mul(a), &a.tr_mul(b), lambda)
    } else {
        let alpha = solve_regularized(&(a * a.transpose()), b, lambda)?;
        Ok(a.tr_mul(&alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::testutil::random_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn objective_grad(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        (a.transpose() * (a * w - b) + w * lambda) * 2.0
    }

    #[test]
    fn primal_and_dual_are_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (n, p) in [(30, 5), (4, 12)] {
            let a = random_matrix(&mut rng, n, p);
            let b = random_matrix(&mut rng, n, 3);
            let w = ridge(&a, &b, 0.3).unwrap();
            assert!(objective_grad(&a, &b, &w, 0.3).amax() < 1e-10, "n={n} p={p}");
        }
    }

    #[test]
    fn singular_without_regularizer() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(ridge(&a, &b, 0.0), Err(Error::Singular(_))));
        assert!(ridge(&a, &b, 1e-3).is_ok());
        assert!(ridge(&a, &b, -1.0).is_err());
    }

    #[test]
    fn underdetermined_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 2, 6);
        let b = random_matrix(&mut rng, 2, 3);
        let w = ridge(&a, &b, 0.0).unwrap();
        assert!((a * w - b).amax() < 1e-10);
    }

    #[test]
    fn huge_regularizer_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(&mut rng, 10, 3);
        let b = random_matrix(&mut rng, 10, 2);
        assert!(ridge(&a, &b, 1e12).unwrap().amax() < 1e-9);
    }
}
