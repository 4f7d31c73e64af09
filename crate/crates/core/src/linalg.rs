//! Thin wrappers over `faer` for the dense operations used across the crate.

use faer::complex_native::c64;
use faer::prelude::*;
use faer::{Mat, Side};
use num_complex::Complex64;

pub use faer::Mat as Matrix;

fn to_c(z: c64) -> Complex64 {
    Complex64::new(z.re, z.im)
}

/// Eigenvalues and right eigenvectors (as columns) of a real square matrix.
pub fn eig_real(a: &Mat<f64>) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
    let evd = a.eigendecomposition::<c64>();
    let s = evd.s().column_vector();
    let u = evd.u();
    let n = a.nrows();
    let values = (0..n).map(|i| to_c(s.read(i))).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| to_c(u.read(i, j))).collect()).collect();
    (values, vectors)
}

/// Eigenvalues of a real square matrix.
pub fn eigvals_real(a: &Mat<f64>) -> Vec<Complex64> {
    a.eigenvalues::<c64>().into_iter().map(to_c).collect()
}

/// Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix.
pub fn sym_eig(a: &Mat<f64>) -> (Vec<f64>, Mat<f64>) {
    let evd = a.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(i).total_cmp(&s.read(j)));
    let values = order.iter().map(|&i| s.read(i)).collect();
    let u = evd.u();
    let vectors = Mat::from_fn(n, n, |i, j| u.read(i, order[j]));
    (values, vectors)
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigvals(a: &Mat<f64>) -> Vec<f64> {
    let mut v = a.selfadjoint_eigenvalues(Side::Lower);
    v.sort_by(f64::total_cmp);
    v
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &Mat<f64>) -> Vec<f64> {
    a.singular_values()
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn lu_solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    (0..b.len()).map(|i| x.read(i, 0)).collect()
}

pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a.read(i, j) * x[j]).sum())
        .collect()
}

pub fn matvec_complex(a: &Mat<f64>, x: &[Complex64]) -> Vec<Complex64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| x[j] * a.read(i, j)).sum())
        .collect()
}

/// Max-row-sum norm.
pub fn norm_inf(a: &Mat<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a.read(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor polynomial.
pub fn expm(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    let norm = norm_inf(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let x = Mat::from_fn(n, n, |i, j| a.read(i, j) * scale);
    let mut result = Mat::<f64>::identity(n, n);
    let mut term = Mat::<f64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &x * (1.0 / k as f64);
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
