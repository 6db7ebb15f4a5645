//! Fréchet derivative of the matrix logarithm at an SPD point, in a symmetric
//! direction.
//!
//! With `X = V diag(λ) Vᵀ`, `D log(X)[H] = V (L ∘ (Vᵀ H V)) Vᵀ` where `L` is the
//! Loewner matrix of first divided differences of `log` over the spectrum.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::symmat::{logm, sym, SpdMatrix, SymMatrix};

/// Relative eigenvalue gap under which the divided difference is replaced by
/// its confluent limit.
const DEGENERATE_GAP: f64 = 1e-12;

/// `D log(X)[·]` with the eigenbasis and Loewner matrix of `X` precomputed, so
/// repeated directions cost four `d×d` products each.
#[derive(Debug, Clone)]
pub struct LogDerivative {
    eigenvectors: DMatrix<f64>,
    loewner: DMatrix<f64>,
}

impl LogDerivative {
    pub fn new(x: &SpdMatrix) -> Self {
        let spec = x.spectrum();
        let lam = &spec.eigenvalues;
        let d = lam.len();
        let lmax = spec.max_eigenvalue();
        let loewner = DMatrix::from_fn(d, d, |k, l| log_divided_difference(lam[k], lam[l], lmax));
        LogDerivative {
            eigenvectors: spec.eigenvectors.clone(),
            loewner,
        }
    }

    pub fn dim(&self) -> usize {
        self.loewner.nrows()
    }

    pub fn loewner(&self) -> &DMatrix<f64> {
        &self.loewner
    }

    pub fn apply(&self, h: &SymMatrix) -> Result<SymMatrix> {
        check_dim(self.dim(), h.dim())?;
        let v = &self.eigenvectors;
        let inner = v.transpose() * h.as_matrix() * v;
        let scaled = inner.component_mul(&self.loewner);
        Ok(sym(&(v * scaled * v.transpose())))
    }
}

/// `(log a − log b)/(a − b)`, or `1/a` on the diagonal.
fn log_divided_difference(a: f64, b: f64, lmax: f64) -> f64 {
    let gap = a - b;
    if gap.abs() <= DEGENERATE_GAP * lmax {
        return 2.0 / (a + b);
    }
    let z = gap / b;
    if z.abs() < 0.5 {
        // log(a) − log(b) = log1p((a − b)/b) avoids cancellation for close pairs
        z.ln_1p() / gap
    } else {
        (a.ln() - b.ln()) / gap
    }
}

/// `D log(X)[H]`.
pub fn dlog(x: &SpdMatrix, h: &SymMatrix) -> Result<SymMatrix> {
    check_dim(x.dim(), h.dim())?;
    LogDerivative::new(x).apply(h)
}

/// Default central-difference step `1e-5·‖X‖_F / max(1, ‖H‖_F)`.
pub fn default_fd_step(x: &SpdMatrix, h: &SymMatrix) -> f64 {
    1e-5 * x.as_sym().frob_norm() / h.frob_norm().max(1.0)
}

/// Central difference `(log(X + hH) − log(X − hH)) / 2h`, halving `h` until
/// both perturbed points are positive definite.
pub fn dlog_fd_oracle(x: &SpdMatrix, h: &SymMatrix, step: f64) -> Result<SymMatrix> {
    check_dim(x.dim(), h.dim())?;
    let mut t = step;
    while t > f64::MIN_POSITIVE {
        let plus = SpdMatrix::new(x.as_sym() + &h.scale(t));
        let minus = SpdMatrix::new(x.as_sym() - &h.scale(t));
        match (plus, minus) {
            (Ok(p), Ok(m)) => return Ok((&logm(&p) - &logm(&m)).scale(0.5 / t)),
            (Err(Error::NotPositiveDefinite { .. }), _) | (_, Err(Error::NotPositiveDefinite { .. })) => {
                t *= 0.5;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Err(Error::StepUnderflow)
}
