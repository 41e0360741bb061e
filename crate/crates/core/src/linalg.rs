//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::CMatrix;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Column `i` of the returned matrix is the eigenvector of `values[i]`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    // Symmetrize first: nalgebra only reads one triangle.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `U diag(f(lambda)) U^H` for a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, u) = hermitian_eigen(m);
    let mut scaled = u.clone();
    for (c, &l) in values.iter().enumerate() {
        let s = f(l);
        scaled.column_mut(c).scale_mut(s);
    }
    scaled * u.adjoint()
}

/// Least-squares left inverse `(A^H A)^{-1} A^H` of a tall full-column-rank matrix.
pub fn left_inverse(a: &CMatrix) -> Result<CMatrix> {
    let gram = a.adjoint() * a;
    let scale = gram.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::RankDeficient("zero or non-finite columns"));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::RankDeficient("A^H A not positive definite"))?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot <= 1e-13 * scale {
        return Err(Error::RankDeficient("A^H A numerically singular"));
    }
    Ok(chol.solve(&a.adjoint()))
}

/// Column-major vectorization.
pub fn vec(m: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Real part of a complex matrix.
pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).norm() <= tol * m.norm().max(1.0)
}
