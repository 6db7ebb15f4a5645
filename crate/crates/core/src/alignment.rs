//! LogEuclidean kernel, its Gram matrix, and the centered kernel-target
//! alignment objective with its Euclidean and Riemannian gradients.
//!
//! The objective is `f(G) = ⟨U h(G) U, yyᵀ⟩ / ‖U h(G) U‖_F` with
//! `h_ij(G) = tr(log(G^{-1/2} X_i G^{-1/2}) log(G^{-1/2} X_j G^{-1/2}))` and
//! `U = I − 11ᵀ/n`. The constant `‖yyᵀ‖_F = n` is left out, so values lie in
//! `[−n, n]` rather than `[−1, 1]`; the maximizer is the same either way.
//!
//! The gradient follows the adjoint construction
//! `∇f = Σ_ij Z_ij ∇h_ij` with
//! `Z = U (yyᵀ/‖UhU‖ − f·UhU/‖UhU‖²) U` and
//! `∇h_ij = X_i^{-1/2} D log(X_i^{-1/2} G X_i^{-1/2})[sym(A_ij)] X_i^{-1/2} + (i ↔ j)`,
//! `A_ij = X_i^{1/2} X_j^{-1/2} Q_j X_j^{1/2} X_i^{-1/2}`,
//! `Q_j = log(X_j^{-1/2} G X_j^{-1/2})`.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{congruent, log_whitened};
use crate::logderiv::LogDerivative;
use crate::symmat::{invsqrtm, logm, sqrtm, sym, SpdMatrix, SymMatrix};

/// Norm of `U h U` at or below which the alignment is undefined.
pub const DEGENERATE_GRAM_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

/// Binary-labelled SPD samples sharing one dimension; at least two samples.
#[derive(Debug, Clone)]
pub struct LabeledSpdDataset {
    samples: Vec<SpdMatrix>,
    labels: Vec<Label>,
}

impl LabeledSpdDataset {
    pub fn new(samples: Vec<SpdMatrix>, labels: Vec<Label>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        let d = samples[0].dim();
        for (i, x) in samples.iter().enumerate() {
            if x.dim() != d {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has dimension {}, expected {d}",
                    x.dim()
                )));
            }
        }
        Ok(LabeledSpdDataset { samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn samples(&self) -> &[SpdMatrix] {
        &self.samples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn targets(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.labels.iter().map(|l| l.sign()))
    }

    pub fn into_parts(self) -> (Vec<SpdMatrix>, Vec<Label>) {
        (self.samples, self.labels)
    }
}

/// `k_G(X, X') = tr(log(G^{-1/2} X G^{-1/2}) log(G^{-1/2} X' G^{-1/2}))`.
pub fn kernel_le(g: &SpdMatrix, x: &SpdMatrix, xp: &SpdMatrix) -> Result<f64> {
    check_dim(g.dim(), x.dim())?;
    check_dim(g.dim(), xp.dim())?;
    let w = invsqrtm(g);
    Ok(log_whitened(&w, x)?.dot(&log_whitened(&w, xp)?))
}

/// `U = I − 11ᵀ/n`.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    let c = 1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - c } else { -c })
}

/// `U M U` without forming `U`: subtract row and column means, add back the grand mean.
fn double_center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n).map(|i| m.row(i).sum() / nf).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| m.column(j).sum() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] - row_mean[i] - col_mean[j] + grand)
}

/// How per-sample contributions are combined when the sample loop runs in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Collected then summed in sample order; bit-reproducible for any thread count.
    #[default]
    Ordered,
    /// Tree reduction in completion order; results may drift by ~1e-10.
    Unordered,
}

/// How `Σ_ij Z_ij ∇h_ij` is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assembly {
    /// Every ordered pair `(i, j)`: `2n²` log-derivative applications.
    Pairwise,
    /// Pairs `i ≤ j` with doubled off-diagonal weight (`∇h_ij = ∇h_ji`).
    PairwiseUpper,
    /// By linearity of `D log`, `Σ_j Z_ij sym(A_ij)` is formed first, so only
    /// `n` log-derivative applications are needed.
    #[default]
    Aggregated,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KtaOptions {
    pub reduction: Reduction,
    pub assembly: Assembly,
}

/// Evaluation counters, for sizing experiments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub objective_evals: u64,
    pub gradient_evals: u64,
    pub dlog_applications: u64,
}

#[derive(Debug, Clone)]
pub struct KtaGradient {
    /// `f(G)`.
    pub value: f64,
    /// `∇f(G)`, symmetric.
    pub euclid_grad: SymMatrix,
    /// `G sym(∇f(G)) G`.
    pub riem_grad: SymMatrix,
}

/// Gram matrix and its centered form at one `G`.
struct Centered {
    value: f64,
    centered: DMatrix<f64>,
    norm: f64,
}

/// The alignment objective over a fixed dataset, with `X_i^{±1/2}` cached.
pub struct KtaProblem<'a> {
    ds: &'a LabeledSpdDataset,
    sqrt: Vec<SpdMatrix>,
    invsqrt: Vec<SpdMatrix>,
    y: DVector<f64>,
    opts: KtaOptions,
    objective_evals: AtomicU64,
    gradient_evals: AtomicU64,
    dlog_applications: AtomicU64,
}

impl<'a> KtaProblem<'a> {
    pub fn new(ds: &'a LabeledSpdDataset) -> Self {
        Self::with_options(ds, KtaOptions::default())
    }

    pub fn with_options(ds: &'a LabeledSpdDataset, opts: KtaOptions) -> Self {
        let sqrt = ds.samples().par_iter().map(sqrtm).collect();
        let invsqrt = ds.samples().par_iter().map(invsqrtm).collect();
        KtaProblem {
            ds,
            sqrt,
            invsqrt,
            y: ds.targets(),
            opts,
            objective_evals: AtomicU64::new(0),
            gradient_evals: AtomicU64::new(0),
            dlog_applications: AtomicU64::new(0),
        }
    }

    pub fn dataset(&self) -> &LabeledSpdDataset {
        self.ds
    }

    pub fn options(&self) -> KtaOptions {
        self.opts
    }

    pub fn stats(&self) -> EvalStats {
        EvalStats {
            objective_evals: self.objective_evals.load(Ordering::Relaxed),
            gradient_evals: self.gradient_evals.load(Ordering::Relaxed),
            dlog_applications: self.dlog_applications.load(Ordering::Relaxed),
        }
    }

    /// `h(G)`.
    pub fn gram(&self, g: &SpdMatrix) -> Result<DMatrix<f64>> {
        check_dim(self.ds.dim(), g.dim())?;
        let w = invsqrtm(g);
        let logs: Vec<SymMatrix> = self
            .ds
            .samples()
            .par_iter()
            .map(|x| log_whitened(&w, x))
            .collect::<Result<_>>()?;
        let n = logs.len();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = logs[i].dot(&logs[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    fn centered(&self, g: &SpdMatrix) -> Result<Centered> {
        let centered = double_center(&self.gram(g)?);
        let norm = centered.norm();
        if !(norm > DEGENERATE_GRAM_TOL) {
            return Err(Error::DegenerateGram { norm });
        }
        let value = (&self.y.transpose() * &centered * &self.y)[(0, 0)] / norm;
        Ok(Centered {
            value,
            centered,
            norm,
        })
    }

    /// `f(G)`.
    pub fn objective(&self, g: &SpdMatrix) -> Result<f64> {
        self.objective_evals.fetch_add(1, Ordering::Relaxed);
        Ok(self.centered(g)?.value)
    }

    /// `Z(G) = U (yyᵀ/‖UhU‖ − f·UhU/‖UhU‖²) U`, along with `f(G)`.
    pub fn z_matrix(&self, g: &SpdMatrix) -> Result<(f64, DMatrix<f64>)> {
        let c = self.centered(g)?;
        let yy = &self.y * self.y.transpose();
        let inner = yy / c.norm - &c.centered * (c.value / (c.norm * c.norm));
        Ok((c.value, double_center(&inner)))
    }

    /// `Q_i(G)` and the cached log-derivative at `X_i^{-1/2} G X_i^{-1/2}`.
    fn per_sample(&self, g: &SpdMatrix) -> Result<Vec<(SymMatrix, LogDerivative)>> {
        self.invsqrt
            .par_iter()
            .map(|w| {
                let m = congruent(w, g)?;
                Ok((logm(&m), LogDerivative::new(&m)))
            })
            .collect()
    }

    /// `A_ij = X_i^{1/2} X_j^{-1/2} Q_j X_j^{1/2} X_i^{-1/2}`.
    fn a_matrix(&self, i: usize, j: usize, q_j: &SymMatrix) -> DMatrix<f64> {
        self.sqrt[i].as_matrix()
            * self.invsqrt[j].as_matrix()
            * q_j.as_matrix()
            * self.sqrt[j].as_matrix()
            * self.invsqrt[i].as_matrix()
    }

    /// `X_i^{-1/2} D log(·)[sym(A)] X_i^{-1/2}`, the `i`-side half of `∇h_ij`.
    fn half_grad(&self, i: usize, dl: &LogDerivative, a: &DMatrix<f64>) -> Result<SymMatrix> {
        self.dlog_applications.fetch_add(1, Ordering::Relaxed);
        Ok(dl.apply(&sym(a))?.congruence(self.invsqrt[i].as_matrix()))
    }

    /// `∇h_ij(G)`.
    pub fn grad_h(&self, g: &SpdMatrix, i: usize, j: usize) -> Result<SymMatrix> {
        let ps = self.per_sample(g)?;
        self.grad_h_cached(&ps, i, j)
    }

    fn grad_h_cached(&self, ps: &[(SymMatrix, LogDerivative)], i: usize, j: usize) -> Result<SymMatrix> {
        let left = self.half_grad(i, &ps[i].1, &self.a_matrix(i, j, &ps[j].0))?;
        let right = self.half_grad(j, &ps[j].1, &self.a_matrix(j, i, &ps[i].0))?;
        Ok(&left + &right)
    }

    /// Objective value with Euclidean and Riemannian gradients at `G`.
    pub fn gradient(&self, g: &SpdMatrix) -> Result<KtaGradient> {
        self.gradient_evals.fetch_add(1, Ordering::Relaxed);
        let (value, z) = self.z_matrix(g)?;
        let ps = self.per_sample(g)?;
        let n = self.ds.len();

        let terms: Vec<SymMatrix> = match self.opts.assembly {
            Assembly::Pairwise => (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut acc = SymMatrix::zeros(g.dim());
                    for j in 0..n {
                        acc = &acc + &self.grad_h_cached(&ps, i, j)?.scale(z[(i, j)]);
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?,
            Assembly::PairwiseUpper => (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut acc = self.grad_h_cached(&ps, i, i)?.scale(z[(i, i)]);
                    for j in i + 1..n {
                        acc = &acc + &self.grad_h_cached(&ps, i, j)?.scale(2.0 * z[(i, j)]);
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?,
            Assembly::Aggregated => {
                // B_j = X_j^{-1/2} Q_j X_j^{1/2}
                let b: Vec<DMatrix<f64>> = (0..n)
                    .into_par_iter()
                    .map(|j| self.invsqrt[j].as_matrix() * ps[j].0.as_matrix() * self.sqrt[j].as_matrix())
                    .collect();
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut t = DMatrix::zeros(g.dim(), g.dim());
                        for (j, bj) in b.iter().enumerate() {
                            t += bj * z[(i, j)];
                        }
                        let a = self.sqrt[i].as_matrix() * t * self.invsqrt[i].as_matrix();
                        Ok(self.half_grad(i, &ps[i].1, &a)?.scale(2.0))
                    })
                    .collect::<Result<_>>()?
            }
        };

        let euclid_grad = match self.opts.reduction {
            Reduction::Ordered => terms
                .iter()
                .fold(SymMatrix::zeros(g.dim()), |acc, t| &acc + t),
            Reduction::Unordered => terms
                .into_par_iter()
                .reduce(|| SymMatrix::zeros(g.dim()), |a, b| &a + &b),
        };
        let riem_grad = riemannian_gradient(g, &euclid_grad);
        Ok(KtaGradient {
            value,
            euclid_grad,
            riem_grad,
        })
    }
}

/// `G sym(∇f) G`.
pub fn riemannian_gradient(g: &SpdMatrix, euclid: &SymMatrix) -> SymMatrix {
    euclid.congruence(g.as_matrix())
}

pub fn gram(g: &SpdMatrix, ds: &LabeledSpdDataset) -> Result<DMatrix<f64>> {
    KtaProblem::new(ds).gram(g)
}

pub fn kta_objective(g: &SpdMatrix, ds: &LabeledSpdDataset) -> Result<f64> {
    KtaProblem::new(ds).objective(g)
}

pub fn kta_gradient(g: &SpdMatrix, ds: &LabeledSpdDataset) -> Result<KtaGradient> {
    KtaProblem::new(ds).gradient(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist_airm;
    use crate::random::{random_spd, random_sym};
    use crate::symmat::frob_inner;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn random_dataset(d: usize, n: usize, seed: u64) -> LabeledSpdDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n).map(|_| random_spd(d, 1.0, &mut rng)).collect();
        let labels = (0..n)
            .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        LabeledSpdDataset::new(samples, labels).unwrap()
    }

    #[test]
    fn dataset_validation() {
        let x = SpdMatrix::identity(2);
        assert!(LabeledSpdDataset::new(vec![x.clone()], vec![Label::Positive]).is_err());
        assert!(LabeledSpdDataset::new(vec![x.clone(), x.clone()], vec![Label::Positive]).is_err());
        assert!(LabeledSpdDataset::new(
            vec![x.clone(), SpdMatrix::identity(3)],
            vec![Label::Positive, Label::Negative]
        )
        .is_err());
    }

    #[test]
    fn kernel_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = random_spd(3, 1.0, &mut rng);
        assert!(kernel_le(&g, &g, &g).unwrap().abs() < 1e-24);

        let id = SpdMatrix::identity(2);
        let a = SpdMatrix::from_diagonal(&[E, 1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[E, E]).unwrap();
        assert!((kernel_le(&id, &a, &b).unwrap() - 1.0).abs() < 1e-15);

        let x = random_spd(3, 1.0, &mut rng);
        let k = kernel_le(&g, &x, &x).unwrap();
        assert!((k - dist_airm(&g, &x).unwrap().powi(2)).abs() < 1e-9);
    }

    #[test]
    fn gram_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = random_spd(3, 1.0, &mut rng);
        let ds = LabeledSpdDataset::new(vec![g.clone(), g.clone()], vec![Label::Positive, Label::Negative]).unwrap();
        assert!(gram(&g, &ds).unwrap().amax() < 1e-24);

        let ds = random_dataset(3, 5, 23);
        let h = gram(&SpdMatrix::identity(3), &ds).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let e = frob_inner(&logm(&ds.samples()[i]), &logm(&ds.samples()[j])).unwrap();
                assert!((h[(i, j)] - e).abs() < 1e-12);
            }
        }
        let h = gram(&g, &ds).unwrap();
        assert_eq!(h, h.transpose());
        let lmin = h.symmetric_eigenvalues().min();
        assert!(lmin >= -1e-9);
    }

    #[test]
    fn centering_examples() {
        assert_eq!(centering_matrix(1), DMatrix::from_element(1, 1, 0.0));
        assert_eq!(centering_matrix(2), DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        let u = centering_matrix(10);
        assert!((&u * &u - &u).amax() < 1e-14);
        assert!((&u * DVector::from_element(10, 1.0)).amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let m = crate::random::standard_normal_matrix(6, 6, &mut rng);
        let u = centering_matrix(6);
        assert!((double_center(&m) - &u * &m * &u).amax() < 1e-14);
    }

    #[test]
    fn two_sample_alignment_is_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let ds = LabeledSpdDataset::new(
            vec![random_spd(3, 1.0, &mut rng), random_spd(3, 1.0, &mut rng)],
            vec![Label::Positive, Label::Negative],
        )
        .unwrap();
        let g = random_spd(3, 1.0, &mut rng);
        assert!((kta_objective(&g, &ds).unwrap() - 2.0).abs() < 1e-12);
        let grad = kta_gradient(&g, &ds).unwrap();
        assert!(grad.euclid_grad.frob_norm() < 1e-10);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let x = SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let ds = LabeledSpdDataset::new(vec![x.clone(); 4], vec![Label::Positive, Label::Negative, Label::Positive, Label::Negative]).unwrap();
        let err = kta_objective(&SpdMatrix::identity(2), &ds).unwrap_err();
        assert!(matches!(err, Error::DegenerateGram { .. }));
        assert!(matches!(kta_gradient(&x, &ds), Err(Error::DegenerateGram { .. })));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let ds = random_dataset(3, 6, 26);
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let g = random_spd(3, 0.5, &mut rng);
        let prob = KtaProblem::new(&ds);
        let grad = prob.gradient(&g).unwrap();
        for _ in 0..5 {
            let h = random_sym(3, &mut rng);
            let step = 1e-5;
            let fp = prob.objective(&SpdMatrix::new(g.as_sym() + &h.scale(step)).unwrap()).unwrap();
            let fm = prob.objective(&SpdMatrix::new(g.as_sym() - &h.scale(step)).unwrap()).unwrap();
            let fd = (fp - fm) / (2.0 * step);
            let an = grad.euclid_grad.dot(&h);
            assert!((an - fd).abs() / fd.abs().max(1e-8) < 1e-5, "analytic {an} vs fd {fd}");
        }
    }

    #[test]
    fn assemblies_agree() {
        let ds = random_dataset(3, 7, 28);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = random_spd(3, 0.5, &mut rng);
        let grads: Vec<SymMatrix> = [Assembly::Pairwise, Assembly::PairwiseUpper, Assembly::Aggregated]
            .into_iter()
            .map(|assembly| {
                let opts = KtaOptions { assembly, ..Default::default() };
                KtaProblem::with_options(&ds, opts).gradient(&g).unwrap().euclid_grad
            })
            .collect();
        let scale = grads[0].frob_norm();
        assert!((&grads[0] - &grads[1]).frob_norm() <= 1e-12 * scale.max(1.0));
        assert!((&grads[0] - &grads[2]).frob_norm() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn grad_h_is_symmetric_in_pair() {
        let ds = random_dataset(3, 4, 30);
        let g = SpdMatrix::from_diagonal(&[1.0, 2.0, 0.5]).unwrap();
        let prob = KtaProblem::new(&ds);
        let a = prob.grad_h(&g, 1, 3).unwrap();
        let b = prob.grad_h(&g, 3, 1).unwrap();
        assert!((&a - &b).frob_norm() < 1e-12 * a.frob_norm().max(1.0));
    }

    #[test]
    fn riemannian_gradient_is_dual() {
        let ds = random_dataset(3, 6, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let g = random_spd(3, 0.5, &mut rng);
        let grad = kta_gradient(&g, &ds).unwrap();
        for _ in 0..20 {
            let h = random_sym(3, &mut rng);
            let lhs = crate::geometry::tangent_inner(&g, &grad.riem_grad, &h).unwrap();
            let rhs = grad.euclid_grad.dot(&h);
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn counters_track_work() {
        let ds = random_dataset(2, 5, 33);
        let prob = KtaProblem::new(&ds);
        let g = SpdMatrix::identity(2);
        prob.objective(&g).unwrap();
        prob.gradient(&g).unwrap();
        let s = prob.stats();
        assert_eq!(s.objective_evals, 1);
        assert_eq!(s.gradient_evals, 1);
        assert_eq!(s.dlog_applications, 5);
    }
}
