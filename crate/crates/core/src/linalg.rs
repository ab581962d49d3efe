//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// `√(xᵀ A x)` for a symmetric positive semi-definite `A`.
pub fn quad_norm(a: &Matrix, x: &Vector) -> f64 {
    x.dot(&(a * x)).max(0.0).sqrt()
}

pub fn cholesky(a: &Matrix) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone())
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
pub fn inverse_and_logdet(a: &Matrix) -> Option<(Matrix, f64)> {
    let chol = cholesky(a)?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Some((chol.inverse(), logdet))
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(a: &Matrix) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn outer(x: &Vector) -> Matrix {
    x * x.transpose()
}

pub fn standard_normal_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draw from `N(mean, scale² · Σ)` given the lower Cholesky factor of `Σ`.
pub fn gaussian_sample<R: Rng + ?Sized>(mean: &Vector, chol_lower: &Matrix, scale: f64, rng: &mut R) -> Vector {
    let g = standard_normal_vector(mean.len(), rng);
    mean + (chol_lower * g) * scale
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}
