//! End-to-end synthetic benchmark: generate a dataset, learn the reference
//! point from the training split, and score 1-NN with five distances.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::alignment::{KtaProblem, LabeledSpdDataset};
use crate::error::Result;
use crate::geometry::{karcher_mean, KarcherConfig};
use crate::learnkit::{balanced_labels, evaluate_accuracy, toy_generate, MetricSpec, Reference, ToyConfig};
use crate::optimize::{learn_metric, OptTrace, OptimizerConfig};
use crate::random::{random_spd, random_sym};
use crate::symmat::{frob_inner, SpdMatrix, SymMatrix};

/// Benchmark columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    LeIdentity,
    LeMean,
    LeLearned,
    Airm,
    Euclid,
}

impl Column {
    pub const ALL: [Column; 5] = [Column::LeIdentity, Column::LeMean, Column::LeLearned, Column::Airm, Column::Euclid];

    pub fn name(self) -> &'static str {
        match self {
            Column::LeIdentity => "LE-identity",
            Column::LeMean => "LE-mean",
            Column::LeLearned => "LE-learned",
            Column::Airm => "AIRM",
            Column::Euclid => "Euclid",
        }
    }
}

/// Accuracies in `[0, 1]` indexed like [`Column::ALL`].
pub type Accuracies = [f64; 5];

#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub seed: u64,
    pub accuracies: Accuracies,
    pub trace: OptTrace,
}

/// One repetition with the dataset drawn from `cfg`.
pub fn run_repetition(cfg: &ToyConfig, opt: &OptimizerConfig) -> Result<RepOutcome> {
    let (train, test) = toy_generate(cfg)?;
    let g0 = karcher_mean(train.samples(), KarcherConfig::default())?.mean;
    let (g, trace) = learn_metric(&train, &g0, opt)?;
    let mut accuracies = [0.0; 5];
    for (k, col) in Column::ALL.iter().enumerate() {
        let metric = match col {
            Column::LeIdentity => MetricSpec::LogEuclid(Reference::Identity),
            Column::LeMean => MetricSpec::LogEuclid(Reference::Explicit(g0.clone())),
            Column::LeLearned => MetricSpec::LogEuclid(Reference::Explicit(g.clone())),
            Column::Airm => MetricSpec::Airm,
            Column::Euclid => MetricSpec::Euclid,
        };
        accuracies[k] = evaluate_accuracy(&train, &test, &metric)?;
    }
    Ok(RepOutcome {
        seed: cfg.seed,
        accuracies,
        trace,
    })
}

/// Seeds for `reps` independent repetitions at half-dimension `r`.
pub fn repetition_seeds(seed: u64, r: usize, reps: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    (0..reps).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub dim: usize,
    pub reps: Vec<RepOutcome>,
}

impl BenchRow {
    pub fn mean(&self) -> Accuracies {
        let mut m = [0.0; 5];
        for rep in &self.reps {
            for (acc, v) in m.iter_mut().zip(rep.accuracies) {
                *acc += v;
            }
        }
        m.map(|v| v / self.reps.len() as f64)
    }

    pub fn get(&self, col: Column) -> f64 {
        let k = Column::ALL.iter().position(|&c| c == col).unwrap();
        self.mean()[k]
    }
}

/// Runs `reps` repetitions of `template`, drawing a fresh dataset (and `Q`) per repetition.
pub fn bench_toy(template: &ToyConfig, reps: usize, seed: u64, opt: &OptimizerConfig) -> Result<BenchRow> {
    let outcomes = repetition_seeds(seed, template.r, reps)
        .into_iter()
        .map(|s| {
            let cfg = ToyConfig { seed: s, ..template.clone() };
            let out = run_repetition(&cfg, opt)?;
            log::info!(
                "d={} seed={} acc={:?} f: {:.4} -> {:.4} ({} iters, {:?})",
                cfg.dim(),
                s,
                out.accuracies,
                out.trace.initial_f,
                out.trace.final_f(),
                out.trace.records.len(),
                out.trace.termination
            );
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(BenchRow {
        dim: template.dim(),
        reps: outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Compares `⟨∇f(G), H⟩` with a central difference of the alignment along `H`.
pub fn gradient_check(ds: &LabeledSpdDataset, g: &SpdMatrix, h: &SymMatrix) -> Result<GradCheck> {
    let prob = KtaProblem::new(ds);
    let analytic = frob_inner(&prob.gradient(g)?.euclid_grad, h)?;
    let t = 1e-5 * g.min_eigenvalue().min(1.0) / h.frob_norm().max(f64::MIN_POSITIVE);
    let fp = prob.objective(&SpdMatrix::new(g.as_sym() + &h.scale(t))?)?;
    let fm = prob.objective(&SpdMatrix::new(g.as_sym() - &h.scale(t))?)?;
    let numeric = (fp - fm) / (2.0 * t);
    let rel_error = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
    Ok(GradCheck {
        analytic,
        numeric,
        rel_error,
    })
}

/// A random balanced dataset, reference point and direction.
pub fn random_gradcheck_case<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<(LabeledSpdDataset, SpdMatrix, SymMatrix)> {
    let samples = (0..n).map(|_| random_spd(d, 1.0, rng)).collect();
    let ds = LabeledSpdDataset::new(samples, balanced_labels(n))?;
    let g = random_spd(d, 0.5, rng);
    let h = random_sym(d, rng);
    Ok((ds, g, h))
}

/// Runs `trials` independent random checks.
pub fn gradient_check_trials(d: usize, n: usize, trials: usize, seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let (ds, g, h) = random_gradcheck_case(d, n, &mut rng)?;
            gradient_check(&ds, &g, &h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_deterministic() {
        let a = repetition_seeds(1, 3, 10);
        assert_eq!(a, repetition_seeds(1, 3, 10));
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        assert_ne!(a, repetition_seeds(1, 4, 10));
    }

    #[test]
    fn gradient_checks_pass() {
        for c in gradient_check_trials(3, 6, 5, 11).unwrap() {
            assert!(c.rel_error < 1e-5, "{c:?}");
        }
    }

    #[test]
    fn small_run_produces_valid_accuracies() {
        let cfg = ToyConfig::new(1, 6, 10, 1.0, 6.0, 0);
        let opt = OptimizerConfig {
            max_iter: 5,
            ..OptimizerConfig::default()
        };
        let row = bench_toy(&cfg, 2, 3, &opt).unwrap();
        assert_eq!(row.reps.len(), 2);
        for v in row.mean() {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
