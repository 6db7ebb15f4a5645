//! Random matrix helpers shared by the toy generator and the test suites.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::symmat::{sym, SpdMatrix, SymMatrix};

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthonormal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthonormal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = standard_normal_matrix(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Symmetric matrix with i.i.d. standard-normal upper triangle.
pub fn random_sym<R: Rng + ?Sized>(d: usize, rng: &mut R) -> SymMatrix {
    sym(&standard_normal_matrix(d, d, rng))
}

/// `Q diag(λ) Qᵀ` with `Q` Haar and `log λ ~ U(−spread, spread)`.
pub fn random_spd<R: Rng + ?Sized>(d: usize, spread: f64, rng: &mut R) -> SpdMatrix {
    let q = random_orthonormal(d, rng);
    let lambdas: Vec<f64> = (0..d).map(|_| rng.random_range(-spread..=spread).exp()).collect();
    spd_from_parts(&q, &lambdas)
}

/// `Q diag(λ) Qᵀ` for an orthonormal `Q` and positive `λ`.
pub fn spd_from_parts(q: &DMatrix<f64>, lambdas: &[f64]) -> SpdMatrix {
    SpdMatrix::new(SymMatrix::from_diagonal(lambdas).congruence(q))
        .expect("positive spectrum under orthogonal conjugation")
}
