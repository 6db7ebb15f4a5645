//! Distances on the SPD cone, the congruent transform, the affine-invariant
//! tangent geometry (exp/log maps, inner product) and the Karcher mean.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::symmat::{expm, invsqrtm, logm, sqrtm, SpdMatrix, SymMatrix};

/// `‖A − B‖_F`.
pub fn dist_euclid(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok((a.as_matrix() - b.as_matrix()).norm())
}

/// `‖log A − log B‖_F`.
pub fn dist_logeuclid(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok((&logm(a) - &logm(b)).frob_norm())
}

/// `Γ_M(A) = M A M`.
pub fn congruent(m: &SpdMatrix, a: &SpdMatrix) -> Result<SpdMatrix> {
    check_dim(m.dim(), a.dim())?;
    SpdMatrix::new(a.as_sym().congruence(m.as_matrix()))
}

/// `log(G^{-1/2} X G^{-1/2})`: the LogEuclidean embedding of `X` relative to `G`.
pub fn log_whitened(g_invsqrt: &SpdMatrix, x: &SpdMatrix) -> Result<SymMatrix> {
    Ok(logm(&congruent(g_invsqrt, x)?))
}

/// LogEuclidean distance after the congruent transform by `G^{-1/2}`.
pub fn dist_logeuclid_g(g: &SpdMatrix, a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dim(g.dim(), a.dim())?;
    check_dim(g.dim(), b.dim())?;
    let w = invsqrtm(g);
    Ok((&log_whitened(&w, a)? - &log_whitened(&w, b)?).frob_norm())
}

/// Affine-invariant distance `‖log(A^{-1/2} B A^{-1/2})‖_F`.
pub fn dist_airm(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let m = congruent(&invsqrtm(a), b)?;
    Ok(log_spectrum_norm(m.spectrum().eigenvalues.iter().copied()))
}

/// Affine-invariant distance from the generalized eigenvalues of the pencil
/// `(A, B)`, computed through a Cholesky factor `A = LLᵀ` as the spectrum of
/// `L⁻¹ B L⁻ᵀ`. Independent of the square-root route in [`dist_airm`].
pub fn dist_airm_pencil(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let chol = a
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: a.min_eigenvalue(),
            index: None,
        })?;
    let l = chol.l();
    let linv_b = l
        .solve_lower_triangular(b.as_matrix())
        .expect("Cholesky factor is nonsingular");
    let m = l
        .solve_lower_triangular(&linv_b.transpose())
        .expect("Cholesky factor is nonsingular");
    let pencil = crate::symmat::sym(&m);
    let e = crate::symmat::eigh(&pencil)?;
    Ok(log_spectrum_norm(e.eigenvalues.iter().copied()))
}

fn log_spectrum_norm(eigs: impl Iterator<Item = f64>) -> f64 {
    eigs.map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
}

/// `exp_G(S) = G^{1/2} exp(G^{-1/2} S G^{-1/2}) G^{1/2}`.
pub fn exp_map(g: &SpdMatrix, s: &SymMatrix) -> Result<SpdMatrix> {
    check_dim(g.dim(), s.dim())?;
    let inner = expm(&s.congruence(invsqrtm(g).as_matrix()))?;
    SpdMatrix::new(inner.as_sym().congruence(sqrtm(g).as_matrix()))
}

/// `log_G(A) = G^{1/2} log(G^{-1/2} A G^{-1/2}) G^{1/2}`.
pub fn log_map(g: &SpdMatrix, a: &SpdMatrix) -> Result<SymMatrix> {
    check_dim(g.dim(), a.dim())?;
    let inner = log_whitened(&invsqrtm(g), a)?;
    Ok(inner.congruence(sqrtm(g).as_matrix()))
}

/// Affine-invariant metric `tr(G⁻¹ S_A G⁻¹ S_B)`.
pub fn tangent_inner(g: &SpdMatrix, sa: &SymMatrix, sb: &SymMatrix) -> Result<f64> {
    check_dim(g.dim(), sa.dim())?;
    check_dim(g.dim(), sb.dim())?;
    // tr(G⁻¹ S_A G⁻¹ S_B) = ⟨W S_A W, W S_B W⟩_F with W = G^{-1/2}
    let w = invsqrtm(g);
    Ok(sa.congruence(w.as_matrix()).dot(&sb.congruence(w.as_matrix())))
}

pub fn tangent_norm(g: &SpdMatrix, s: &SymMatrix) -> Result<f64> {
    Ok(tangent_inner(g, s, s)?.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct KarcherConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KarcherConfig {
    fn default() -> Self {
        KarcherConfig {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

/// Result of the Karcher fixed-point iteration.
#[derive(Debug, Clone)]
pub struct KarcherMean {
    pub mean: SpdMatrix,
    /// `‖(1/n) Σ log_X̄(X_i)‖_X̄` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Riemannian (Karcher) mean under the affine-invariant metric.
pub fn riemannian_mean(xs: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<SpdMatrix> {
    Ok(karcher_mean(xs, KarcherConfig { tol, max_iter })?.mean)
}

/// Fixed-point iteration `X̄ ← exp_X̄((1/n) Σ log_X̄(X_i))` from the arithmetic mean.
pub fn karcher_mean(xs: &[SpdMatrix], cfg: KarcherConfig) -> Result<KarcherMean> {
    let first = xs
        .first()
        .ok_or_else(|| Error::InvalidDataset("Karcher mean of an empty set".into()))?;
    let d = first.dim();
    for x in xs {
        check_dim(d, x.dim())?;
    }
    let n = xs.len() as f64;

    let mut arith = first.as_sym().clone();
    for x in &xs[1..] {
        arith = &arith + x.as_sym();
    }
    let mut mean = SpdMatrix::new(arith.scale(1.0 / n))?;

    let mut residual = f64::INFINITY;
    for it in 0..=cfg.max_iter {
        let (step, r) = whitened_tangent_average(&mean, xs)?;
        residual = r;
        if residual < cfg.tol {
            return Ok(KarcherMean {
                mean,
                residual,
                iterations: it,
            });
        }
        if it == cfg.max_iter {
            break;
        }
        let root = sqrtm(&mean);
        mean = SpdMatrix::new(expm(&step)?.as_sym().congruence(root.as_matrix()))?;
    }
    Err(Error::MaxIterExceeded {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Karcher gradient norm `‖(1/n) Σ log_X̄(X_i)‖_X̄`.
pub fn karcher_residual(mean: &SpdMatrix, xs: &[SpdMatrix]) -> Result<f64> {
    Ok(whitened_tangent_average(mean, xs)?.1)
}

/// Average of `log(X̄^{-1/2} X_i X̄^{-1/2})` and its Frobenius norm, which
/// equals the `X̄`-norm of the tangent average at `X̄`. Summed in index order.
fn whitened_tangent_average(mean: &SpdMatrix, xs: &[SpdMatrix]) -> Result<(SymMatrix, f64)> {
    let w = invsqrtm(mean);
    let logs: Vec<SymMatrix> = xs
        .par_iter()
        .map(|x| log_whitened(&w, x))
        .collect::<Result<_>>()?;
    let mut acc = SymMatrix::zeros(mean.dim());
    for l in &logs {
        acc = &acc + l;
    }
    let avg = acc.scale(1.0 / xs.len() as f64);
    let r = avg.frob_norm();
    Ok((avg, r))
}
