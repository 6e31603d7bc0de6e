//! Finite-difference gradient checking.
//!
//! The checker only re-evaluates forward passes, so it stays independent of
//! the backward implementation it is used to verify.

use crate::autodiff::matrix::Matrix;

/// Central-difference gradient of `f` at `at`, one entry at a time.
pub fn central_diff(at: &Matrix, h: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut grad = Matrix::zeros(at.rows(), at.cols());
    let mut probe = at.clone();
    for k in 0..at.data().len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + h;
        let up = f(&probe);
        probe.data_mut()[k] = orig - h;
        let down = f(&probe);
        probe.data_mut()[k] = orig;
        grad.data_mut()[k] = (up - down) / (2.0 * h);
    }
    grad
}

/// Largest elementwise relative error, with an absolute floor of 1 in the
/// denominator so near-zero gradients compare on an absolute scale.
pub fn max_rel_err(analytic: &Matrix, numeric: &Matrix) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}
