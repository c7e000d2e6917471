//! Quadratic forms of the correlation vector: first-order differences and
//! weighted differences to the average correlation.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const MAX_CONDITION: f64 = 1e12;

/// `(L-1) x L` matrix with rows `e_l - e_{l+1}`.
pub fn difference_matrix(l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(l - 1, l, |i, j| {
        if j == i {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `(L-1) x L` matrix mapping correlations to `sqrt(pi_l) (r_l - rbar)`,
/// with masses normalised to sum to one.
pub fn average_matrix(masses: &[f64]) -> DMatrix<f64> {
    let total: f64 = masses.iter().sum();
    let pi: Vec<f64> = masses.iter().map(|m| m / total).collect();
    let l = pi.len();
    DMatrix::from_fn(l - 1, l, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        (delta - pi[j]) * pi[i].sqrt()
    })
}

/// `n * (K r)^T (K S K^T)^{-1} K r`, refusing ill-conditioned middle matrices.
pub fn quadratic_statistic(
    k: &DMatrix<f64>,
    r: &[f64],
    sigma: &DMatrix<f64>,
    n: usize,
) -> Result<f64> {
    let kr = k * DVector::from_column_slice(r);
    let middle = k * sigma * k.transpose();
    let middle = (&middle + middle.transpose()) * 0.5;
    let sv = middle.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return Err(Error::Numeric(format!(
            "covariance of the contrasts is singular (condition {:.3e})",
            smax / smin
        )));
    }
    let sol = middle
        .lu()
        .solve(&kr)
        .ok_or_else(|| Error::Numeric("singular contrast covariance".into()))?;
    Ok((n as f64 * kr.dot(&sol)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaf_special_case() {
        let sigma = DMatrix::identity(2, 2);
        let t = quadratic_statistic(&difference_matrix(2), &[0.1, 0.3], &sigma, 100).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn average_matrix_gives_weighted_differences() {
        let pi = [0.2, 0.5, 0.3];
        let r = [0.1, -0.4, 0.7];
        let rbar: f64 = pi.iter().zip(&r).map(|(a, b)| a * b).sum();
        let br = average_matrix(&pi) * DVector::from_column_slice(&r);
        for l in 0..2 {
            assert!((br[l] - pi[l].sqrt() * (r[l] - rbar)).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_covariance_is_refused() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let res = quadratic_statistic(&difference_matrix(2), &[0.1, 0.3], &sigma, 10);
        assert!(matches!(res, Err(Error::Numeric(_))));
    }
}
