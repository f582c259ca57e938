//! Classical POD baseline via truncated SVD.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ThinSvd;

#[derive(Debug, Clone)]
pub struct PodResult {
    /// `m x r`, orthonormal columns.
    pub modes: DMatrix<f64>,
    /// `r x n`.
    pub amplitudes: DMatrix<f64>,
    /// All `min(m, n)` singular values, nonincreasing.
    pub singular_values: Vec<f64>,
}

impl PodResult {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.modes * &self.amplitudes
    }

    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }
}

/// Best rank-`r` approximation of `x` in the Frobenius norm.
pub fn pod_truncate(x: &DMatrix<f64>, r: usize) -> Result<PodResult> {
    let max_rank = x.nrows().min(x.ncols());
    if r > max_rank {
        return Err(Error::input(format!(
            "rank {r} exceeds min(m, n) = {max_rank}"
        )));
    }
    let svd = ThinSvd::new(x);
    let modes = svd.u.columns(0, r).into_owned();
    let amplitudes = modes.tr_mul(x);
    Ok(PodResult {
        modes,
        amplitudes,
        singular_values: svd.singular_values.iter().copied().collect(),
    })
}

/// Singular values of `x`, nonincreasing.
pub fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut svd = SVD::new(x.clone(), false, false);
    svd.sort_by_singular_values();
    svd.singular_values.iter().copied().collect()
}

/// Relative truncation error `sum_{k>r} s_k^2 / sum_k s_k^2` for every
/// `r = 0..=s.len()`.
pub fn truncation_errors(singular_values: &[f64]) -> Vec<f64> {
    let mut tail = vec![0.0; singular_values.len() + 1];
    for (k, s) in singular_values.iter().enumerate().rev() {
        tail[k] = tail[k + 1] + s * s;
    }
    let total = tail[0];
    if total == 0.0 {
        return tail;
    }
    tail.iter().map(|t| t / total).collect()
}

/// Smallest number of POD modes whose relative Frobenius error
/// `sqrt(relative_error)` is strictly below `tol`.
pub fn modes_for_tolerance(x: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol <= 1.0) {
        return Err(Error::input(format!("tolerance must lie in (0, 1], got {tol}")));
    }
    let s = singular_values(x);
    if s.iter().all(|&v| v == 0.0) {
        return Err(Error::DivisionByZero("snapshot matrix is identically zero"));
    }
    Ok(rank_for_tolerance(&truncation_errors(&s), tol))
}

/// First index whose squared-ratio error satisfies `sqrt(e) < tol`.
pub fn rank_for_tolerance(errors: &[f64], tol: f64) -> usize {
    errors
        .iter()
        .position(|&e| e < tol * tol)
        .unwrap_or(errors.len() - 1)
}

/// One row of a singular-value decay table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    /// 1-based mode index.
    pub index: usize,
    pub singular_value: f64,
    /// `sigma_k / sigma_1`.
    pub normalized: f64,
    /// Relative error of the rank-`index` truncation.
    pub truncation_error: f64,
}

pub fn decay_table(singular_values: &[f64]) -> Vec<DecayEntry> {
    let errors = truncation_errors(singular_values);
    let s1 = singular_values.first().copied().unwrap_or(0.0);
    singular_values
        .iter()
        .enumerate()
        .map(|(k, &s)| DecayEntry {
            index: k + 1,
            singular_value: s,
            normalized: if s1 > 0.0 { s / s1 } else { 0.0 },
            truncation_error: errors[k + 1],
        })
        .collect()
}

/// Projection of `x` onto the span of orthonormal `modes`.
pub fn project(modes: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    modes * modes.tr_mul(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::relative_error;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn rank_one_exact() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]);
        let x = &u * v.transpose();
        let pod = pod_truncate(&x, 1).unwrap();
        assert!(relative_error(&x, &pod.reconstruct()).unwrap() < 1e-12);
        assert_eq!(modes_for_tolerance(&x, 1e-6).unwrap(), 1);
    }

    #[test]
    fn identity_rank_one() {
        let x = DMatrix::<f64>::identity(2, 2);
        let pod = pod_truncate(&x, 1).unwrap();
        assert_abs_diff_eq!(relative_error(&x, &pod.reconstruct()).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn tolerance_one_needs_one_mode() {
        let x = DMatrix::<f64>::identity(3, 3);
        assert_eq!(modes_for_tolerance(&x, 1.0).unwrap(), 1);
    }

    #[test]
    fn bad_arguments() {
        let x = DMatrix::<f64>::identity(2, 3);
        assert!(pod_truncate(&x, 3).is_err());
        assert!(modes_for_tolerance(&x, 0.0).is_err());
        assert!(modes_for_tolerance(&x, 1.5).is_err());
        assert!(modes_for_tolerance(&DMatrix::zeros(2, 2), 0.1).is_err());
    }

    #[test]
    fn zero_rank_reconstructs_zero() {
        let x = DMatrix::<f64>::identity(2, 2);
        let pod = pod_truncate(&x, 0).unwrap();
        assert_eq!(pod.reconstruct(), DMatrix::zeros(2, 2));
        assert_eq!(pod.singular_values, vec![1.0, 1.0]);
    }

    #[test]
    fn decay_table_tail() {
        let t = decay_table(&[2.0, 1.0]);
        assert_eq!(t[0].truncation_error, 0.2);
        assert_eq!(t[1].truncation_error, 0.0);
        assert_eq!(t[1].normalized, 0.5);
    }
}
