//! Symmetric and symmetric positive definite matrix types, plus the spectral
//! matrix functions (log, exp, square root, inverse square root) built on a
//! symmetric eigendecomposition.
//!
//! Every spectral function goes through [`eigh`] and reconstructs
//! `V diag(φ(λ)) Vᵀ`, followed by an explicit symmetrization so outputs are
//! symmetric to the last bit.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Relative tolerance used by [`assert_spd`] when callers do not supply one.
pub const DEFAULT_SPD_TOL: f64 = 1e-12;

/// Sweep budget per unit of dimension for the implicit QR iteration.
const EIGH_SWEEPS_PER_DIM: usize = 100;

/// A real symmetric `d×d` matrix.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.0)
    }
}

impl SymMatrix {
    /// Validates squareness and symmetry (`|a_ij − a_ji| ≤ 1e-12·max(1, max|a|)`),
    /// then stores the exactly symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(sym(&m))
    }

    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, alpha: f64) -> SymMatrix {
        SymMatrix(&self.0 * alpha)
    }

    /// `M · self · Mᵀ`, symmetrized.
    pub fn congruence(&self, m: &DMatrix<f64>) -> SymMatrix {
        sym(&(m * &self.0 * m.transpose()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Unchecked Frobenius inner product; panics on dimension mismatch.
    pub(crate) fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `V diag(w) Vᵀ`, symmetrized.
    pub fn reconstruct_with(&self, w: &[f64]) -> SymMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &wk) in scaled.column_iter_mut().zip(w) {
            col *= wk;
        }
        sym(&(scaled * self.eigenvectors.transpose()))
    }

    /// Applies `phi` to every eigenvalue; fails if `phi` yields a non-finite value.
    pub fn map<F: Fn(f64) -> f64>(&self, phi: F) -> Result<SymMatrix> {
        let w = self.mapped_values(phi)?;
        Ok(self.reconstruct_with(&w))
    }

    fn mapped_values<F: Fn(f64) -> f64>(&self, phi: F) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let v = phi(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::SpectralDomain { eigenvalue: l })
                }
            })
            .collect()
    }
}

/// Symmetric eigendecomposition (Householder tridiagonalization followed by
/// implicit symmetric QR with Wilkinson shifts).
pub fn eigh(x: &SymMatrix) -> Result<SpectralDecomposition> {
    let d = x.dim();
    let max_iter = EIGH_SWEEPS_PER_DIM * d.max(1);
    let eig = SymmetricEigen::try_new(x.0.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNonConvergence { max_iter })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `(M + Mᵀ)/2`.
pub fn sym(m: &DMatrix<f64>) -> SymMatrix {
    assert!(m.is_square(), "sym() requires a square matrix");
    let d = m.nrows();
    SymMatrix(DMatrix::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
}

pub fn frob_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.dot(b))
}

pub fn frob_norm(a: &SymMatrix) -> f64 {
    a.frob_norm()
}

/// A symmetric positive definite matrix together with its eigendecomposition,
/// computed once at construction.
#[derive(Clone)]
pub struct SpdMatrix {
    mat: SymMatrix,
    spectrum: SpectralDecomposition,
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpdMatrix{}", self.mat.0)
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    /// Validates with [`DEFAULT_SPD_TOL`].
    pub fn new(x: SymMatrix) -> Result<Self> {
        assert_spd(x, DEFAULT_SPD_TOL)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_diagonal(&vec![1.0; d]).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(diag))
    }

    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_row_slice(d, entries)?)
    }

    /// Builds `V diag(λ) Vᵀ` from a spectrum known to be strictly positive.
    fn from_spectrum(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        for &l in &eigenvalues {
            if !l.is_finite() {
                return Err(Error::Overflow { eigenvalue: l });
            }
            if l <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    min_eigenvalue: l,
                    index: None,
                });
            }
        }
        let d = eigenvalues.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let spectrum = SpectralDecomposition {
            eigenvalues: DVector::from_iterator(d, order.iter().map(|&k| eigenvalues[k])),
            eigenvectors: DMatrix::from_fn(d, d, |i, j| eigenvectors[(i, order[j])]),
        };
        let mat = spectrum.reconstruct_with(spectrum.eigenvalues.as_slice());
        Ok(SpdMatrix { mat, spectrum })
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.mat
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat.0
    }

    pub fn into_sym(self) -> SymMatrix {
        self.mat
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.min_eigenvalue()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.spectrum.max_eigenvalue()
    }

    pub fn scale(&self, alpha: f64) -> Result<SpdMatrix> {
        let w: Vec<f64> = self.spectrum.eigenvalues.iter().map(|l| l * alpha).collect();
        Self::from_spectrum(w, self.spectrum.eigenvectors.clone())
    }

    /// `X⁻¹`.
    pub fn inverse(&self) -> SpdMatrix {
        self.power(-1.0)
    }

    /// `X^p` for real `p`, sharing the eigenbasis of `X`.
    pub fn power(&self, p: f64) -> SpdMatrix {
        let w: Vec<f64> = self.spectrum.eigenvalues.iter().map(|l| l.powf(p)).collect();
        Self::from_spectrum(w, self.spectrum.eigenvectors.clone())
            .expect("positive powers of a positive spectrum stay positive")
    }
}

/// Accepts `x` iff `λ_min(x) > tol·max(1, λ_max(x))`. No eigenvalue clipping.
pub fn assert_spd(x: SymMatrix, tol: f64) -> Result<SpdMatrix> {
    let spectrum = eigh(&x)?;
    let lmin = spectrum.min_eigenvalue();
    let lmax = spectrum.max_eigenvalue();
    if !(lmin > tol * lmax.max(1.0)) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lmin,
            index: None,
        });
    }
    Ok(SpdMatrix { mat: x, spectrum })
}

/// `V diag(φ(λ)) Vᵀ` for the cached spectrum of `x`.
pub fn spectral_map<F: Fn(f64) -> f64>(x: &SpdMatrix, phi: F) -> Result<SymMatrix> {
    x.spectrum.map(phi)
}

pub fn logm(x: &SpdMatrix) -> SymMatrix {
    spectral_map(x, f64::ln).expect("log is finite on a positive spectrum")
}

pub fn expm(s: &SymMatrix) -> Result<SpdMatrix> {
    let spectrum = eigh(s)?;
    let mut w = Vec::with_capacity(s.dim());
    for &l in spectrum.eigenvalues.iter() {
        let e = l.exp();
        if !e.is_finite() {
            return Err(Error::Overflow { eigenvalue: l });
        }
        w.push(e);
    }
    SpdMatrix::from_spectrum(w, spectrum.eigenvectors)
}

pub fn sqrtm(x: &SpdMatrix) -> SpdMatrix {
    x.power(0.5)
}

pub fn invsqrtm(x: &SpdMatrix) -> SpdMatrix {
    x.power(-0.5)
}
