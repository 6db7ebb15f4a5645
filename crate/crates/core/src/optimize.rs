//! Geodesic gradient ascent of the alignment objective on the SPD manifold,
//! constrained to an affine-invariant ball around the initial reference.
//!
//! Each iteration moves along `G ← exp_G(η·grad_G f)` with Armijo
//! backtracking, then pulls the trial point back onto the ball boundary
//! along the geodesic from `G₀` if it left the ball. On the boundary the
//! outward radial part of the gradient is dropped first.

use std::io::Write;

use log::{debug, warn};

use crate::alignment::{EvalStats, KtaOptions, KtaProblem, LabeledSpdDataset};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dist_airm, exp_map, log_map, tangent_inner, tangent_norm};
use crate::symmat::{SpdMatrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Radius of the affine-invariant ball around `G₀`.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop when the feasible ascent direction has `‖·‖_G < grad_tol·(1 + |f|)`.
    pub grad_tol: f64,
    /// Stop after three consecutive relative improvements below this.
    pub f_rel_tol: f64,
    pub armijo_c: f64,
    pub backtrack_beta: f64,
    pub max_backtracks: usize,
    /// Geodesic length of the first trial step.
    pub init_displacement: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            epsilon: 10.0,
            max_iter: 200,
            grad_tol: 1e-6,
            f_rel_tol: 1e-9,
            armijo_c: 1e-4,
            backtrack_beta: 0.5,
            max_backtracks: 30,
            init_displacement: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("grad_tol", self.grad_tol),
            ("f_rel_tol", self.f_rel_tol),
            ("armijo_c", self.armijo_c),
            ("init_displacement", self.init_displacement),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack_beta > 0.0 && self.backtrack_beta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "backtrack_beta must lie in (0, 1), got {}",
                self.backtrack_beta
            )));
        }
        if self.max_backtracks == 0 {
            return Err(Error::InvalidConfig("max_backtracks must be positive".into()));
        }
        Ok(())
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    /// Objective at the accepted point.
    pub f: f64,
    /// Norm of the ascent direction at the point the step started from; on
    /// the ball boundary this excludes the outward radial component.
    pub grad_norm: f64,
    /// Accepted step size `η`.
    pub step: f64,
    pub dist_to_g0: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    RelativeImprovement,
    MaxIterations,
    /// No Armijo step within the backtracking budget; the best iterate is returned.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct OptTrace {
    pub initial_f: f64,
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub stats: EvalStats,
}

impl OptTrace {
    pub fn final_f(&self) -> f64 {
        self.records.last().map_or(self.initial_f, |r| r.f)
    }

    pub fn line_search_failed(&self) -> bool {
        self.termination == Termination::LineSearchFailed
    }

    /// CSV with header `iter,f,grad_norm,step,dist_to_G0,backtracks`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,f,grad_norm,step,dist_to_G0,backtracks")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{}",
                r.iter, r.f, r.grad_norm, r.step, r.dist_to_g0, r.backtracks
            )?;
        }
        Ok(())
    }
}

/// `exp_G(η·grad)`.
pub fn geodesic_step(g: &SpdMatrix, grad: &SymMatrix, eta: f64) -> Result<SpdMatrix> {
    check_dim(g.dim(), grad.dim())?;
    if !(eta >= 0.0) {
        return Err(Error::InvalidConfig(format!("step size must be non-negative, got {eta}")));
    }
    exp_map(g, &grad.scale(eta))
}

/// Identity inside the ball; otherwise the point at distance `eps` on the
/// geodesic from `G₀` towards `G`.
pub fn retract_to_ball(g0: &SpdMatrix, g: &SpdMatrix, eps: f64) -> Result<SpdMatrix> {
    let r = dist_airm(g0, g)?;
    if r <= eps {
        return Ok(g.clone());
    }
    exp_map(g0, &log_map(g0, g)?.scale(eps / r))
}

/// Maximizes the alignment from `G₀` within the `epsilon` ball.
pub fn learn_metric(
    ds: &LabeledSpdDataset,
    g0: &SpdMatrix,
    cfg: &OptimizerConfig,
) -> Result<(SpdMatrix, OptTrace)> {
    learn_metric_with(ds, g0, cfg, KtaOptions::default())
}

pub fn learn_metric_with(
    ds: &LabeledSpdDataset,
    g0: &SpdMatrix,
    cfg: &OptimizerConfig,
    opts: KtaOptions,
) -> Result<(SpdMatrix, OptTrace)> {
    cfg.validate()?;
    check_dim(ds.dim(), g0.dim())?;
    let prob = KtaProblem::with_options(ds, opts);

    let mut g = g0.clone();
    let mut current = prob.gradient(&g)?;
    let mut f = current.value;
    let mut trace = OptTrace {
        initial_f: f,
        records: Vec::new(),
        termination: Termination::MaxIterations,
        stats: EvalStats::default(),
    };
    let mut last_eta: Option<f64> = None;
    let mut stalled = 0usize;

    for iter in 1..=cfg.max_iter {
        let dir = feasible_direction(g0, &g, &current.riem_grad, cfg.epsilon)?;
        let grad_norm = tangent_norm(&g, &dir)?;
        if !(grad_norm >= cfg.grad_tol * (1.0 + f.abs())) {
            trace.termination = Termination::GradientTolerance;
            break;
        }
        let sq = grad_norm * grad_norm;
        let mut eta = last_eta.map_or(cfg.init_displacement / grad_norm, |e| 2.0 * e);

        let mut accepted = None;
        for backtracks in 0..=cfg.max_backtracks {
            if let Some(trial) = try_step(&prob, g0, &g, &dir, eta, cfg.epsilon) {
                let (cand, fc) = trial;
                if fc >= f + cfg.armijo_c * eta * sq {
                    accepted = Some((cand, fc, backtracks));
                    break;
                }
            }
            eta *= cfg.backtrack_beta;
        }
        let Some((cand, fc, backtracks)) = accepted else {
            warn!("line search failed at iteration {iter}; returning best iterate (f = {f})");
            trace.termination = Termination::LineSearchFailed;
            break;
        };

        let rel = (fc - f) / f.abs().max(f64::MIN_POSITIVE);
        let dist_to_g0 = dist_airm(g0, &cand)?;
        debug!("iter {iter}: f = {fc:.9} |grad| = {grad_norm:.3e} eta = {eta:.3e} dist = {dist_to_g0:.4}");
        g = cand;
        f = fc;
        last_eta = Some(eta);
        trace.records.push(IterRecord {
            iter,
            f,
            grad_norm,
            step: eta,
            dist_to_g0,
            backtracks,
        });

        stalled = if rel < cfg.f_rel_tol { stalled + 1 } else { 0 };
        if stalled >= 3 {
            trace.termination = Termination::RelativeImprovement;
            break;
        }
        if iter < cfg.max_iter {
            current = prob.gradient(&g)?;
        }
    }

    trace.stats = prob.stats();
    Ok((g, trace))
}

/// The ascent direction with its outward radial part removed when `G` sits on
/// the ball boundary.
fn feasible_direction(g0: &SpdMatrix, g: &SpdMatrix, grad: &SymMatrix, eps: f64) -> Result<SymMatrix> {
    let r = dist_airm(g0, g)?;
    if r < eps * (1.0 - 1e-9) {
        return Ok(grad.clone());
    }
    // Unit tangent at G pointing away from G₀.
    let out = log_map(g, g0)?.scale(-1.0 / r);
    let radial = tangent_inner(g, grad, &out)?;
    Ok(if radial > 0.0 { grad - &out.scale(radial) } else { grad.clone() })
}

/// A feasible trial point and its objective, or `None` when the step is not
/// numerically representable (overflow, loss of definiteness, degenerate Gram).
fn try_step(
    prob: &KtaProblem<'_>,
    g0: &SpdMatrix,
    g: &SpdMatrix,
    grad: &SymMatrix,
    eta: f64,
    eps: f64,
) -> Option<(SpdMatrix, f64)> {
    let moved = geodesic_step(g, grad, eta).ok()?;
    let cand = retract_to_ball(g0, &moved, eps).ok()?;
    let fc = prob.objective(&cand).ok()?;
    fc.is_finite().then_some((cand, fc))
}
