//! Small complex linear-algebra helpers shared across modules.
//!
//! Vectorization is column-major everywhere: `vec(X)` stacks the columns of
//! `X`, which is also nalgebra's storage order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;
pub type RVector = DVector<f64>;
pub type RMatrix = DMatrix<f64>;

pub const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Column-stacking of a matrix.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`]; `v.len()` must equal `rows * cols`.
pub fn unvectorize(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols, "unvectorize: length mismatch");
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|a - b|` for complex vectors.
pub fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Largest-over-smallest eigenvalue ratio of a Hermitian positive matrix.
pub fn hermitian_condition(m: &CMatrix) -> f64 {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}
