//! Parameter initialization.

use rand::Rng;

use crate::autodiff::matrix::Matrix;
use crate::rng::stream;

/// Glorot/Xavier uniform: entries in `[-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))]`.
pub fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    assert!(rows >= 1 && cols >= 1);
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| (2.0 * rng.random::<f64>() - 1.0) * bound).collect();
    Matrix::from_vec(rows, cols, data).expect("sized above")
}

/// Xavier init from a bare seed (dedicated "xavier" stream).
pub fn xavier_seeded(rows: usize, cols: usize, seed: u64) -> Matrix {
    xavier(rows, cols, &mut stream(seed, "xavier"))
}
