//! Thin bridge between `ndarray` storage and the dense solvers in `faer`.

use faer::linalg::solvers::{DenseSolveCore, Solve, SolveLstsq};
use faer::{Mat, MatRef, Side};
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

fn to_faer<T: Copy>(a: &Array2<T>) -> Mat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_faer<T: Copy>(m: MatRef<'_, T>) -> Array2<T> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

fn fail(what: &str, e: impl std::fmt::Debug) -> Error {
    Error::Linalg(format!("{what}: {e:?}"))
}

/// Eigenvalues and right eigenvectors (as columns) of a real square matrix.
pub(crate) fn eig(a: &Array2<f64>) -> Result<(Array1<C64>, Array2<C64>)> {
    let evd = to_faer(a).eigen().map_err(|e| fail("eigendecomposition", e))?;
    let s = evd.S().column_vector();
    let values = Array1::from_shape_fn(s.nrows(), |k| s[k]);
    Ok((values, from_faer(evd.U())))
}

pub(crate) fn inv(a: &Array2<C64>) -> Array2<C64> {
    from_faer(to_faer(a).partial_piv_lu().inverse().as_ref())
}

/// Solves the square real system `a x = b`.
pub(crate) fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = to_faer(a).partial_piv_lu().solve(&rhs);
    Array1::from_shape_fn(x.nrows(), |i| x[(i, 0)])
}

/// Full SVD `a = U diag(s) Vᵀ` of a real matrix, returned as `(U, s, Vᵀ)`.
pub(crate) fn svd(a: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let d = to_faer(a).svd().map_err(|e| fail("svd", e))?;
    let s = d.S().column_vector();
    let sv = Array1::from_shape_fn(s.nrows(), |k| s[k]);
    Ok((from_faer(d.U()), sv, from_faer(d.V().transpose())))
}

/// Singular values in non-increasing order.
pub(crate) fn singular_values(a: &Array2<C64>) -> Result<Vec<f64>> {
    to_faer(a).singular_values().map_err(|e| fail("svd", e))
}

/// Eigenvalues of a Hermitian matrix in non-decreasing order.
pub(crate) fn eigvalsh(a: &Array2<C64>) -> Result<Vec<f64>> {
    to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| fail("hermitian eigenvalues", e))
}

/// Least-squares solution of an overdetermined full-column-rank system.
pub(crate) fn lstsq(a: &Array2<C64>, b: &Array1<C64>) -> Array1<C64> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = to_faer(a).qr().solve_lstsq(&rhs);
    Array1::from_shape_fn(x.nrows(), |i| x[(i, 0)])
}

pub(crate) fn norm_l1(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm()).sum()
}

pub(crate) fn norm_l2(a: &Array1<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
