//! Small complex linear-algebra helpers shared by the modules.

use nalgebra::linalg::{Cholesky, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, Error, Result, C64};

/// One draw from CN(0, 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. CN(0, 1) entries, filled column-major.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// (A + A^H) / 2
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// log2 det of a Hermitian positive-definite matrix through its Cholesky factor.
/// The argument is symmetrized first.
pub fn log2_det_hpd(a: &CMatrix) -> Result<f64> {
    let chol = cholesky(a)?;
    let l = chol.l_dirty();
    let ln_det: f64 = (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0;
    Ok(ln_det / std::f64::consts::LN_2)
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inverse_hpd(a: &CMatrix) -> Result<CMatrix> {
    Ok(cholesky(a)?.inverse())
}

/// Complex square roots let the factorization succeed on indefinite input,
/// so the pivots are checked to be real and positive.
fn cholesky(a: &CMatrix) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-12 * d.re
    });
    if ok {
        Ok(chol)
    } else {
        Err(Error::NotPositiveDefinite)
    }
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order and eigenvectors as the matching columns.
pub fn hermitian_eigen_desc(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_hermitian_eigenvalue(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Frobenius norm.
pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Identity of size n.
pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}
