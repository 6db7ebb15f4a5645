//! Synthetic two-class covariance matrices
//! `X = Q diag(λ_1..λ_r, μ_1..μ_r) Qᵀ + V diag(|ε_1|..|ε_2r|) Vᵀ`.
//!
//! `λ` carries the class (`N(5, 0.2)` positive, `N(4, 0.1)` negative), `μ ~ U[mu_lo, mu_hi)`
//! is class-independent nuisance, and `ε ~ N(0, 1)` with a random basis `V` is
//! additive noise. `Q` is shared by every sample of one dataset draw.
//!
//! Random streams: a `ChaCha20` generator seeded from `seed`, with stream 0
//! drawing `Q`, stream 1 the training samples and stream 2 the test samples,
//! so the test split does not depend on `n_train`.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::alignment::{Label, LabeledSpdDataset};
use crate::error::{Error, Result};
use crate::random::random_orthonormal;
use crate::symmat::{SpdMatrix, SymMatrix};

const STREAM_BASIS: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;

/// How the second parameter of the class distributions `N(a, b)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpreadParam {
    #[default]
    StdDev,
    Variance,
}

/// Whether the noise basis `V` is redrawn per sample or shared by the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseBasis {
    #[default]
    PerSample,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    /// Half-dimension; matrices are `2r × 2r`.
    pub r: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub seed: u64,
    /// `(mean, spread)` of the informative eigenvalues for the positive class.
    pub positive: (f64, f64),
    pub negative: (f64, f64),
    pub spread: SpreadParam,
    pub noise_basis: NoiseBasis,
}

impl ToyConfig {
    pub fn new(r: usize, n_train: usize, n_test: usize, mu_lo: f64, mu_hi: f64, seed: u64) -> Self {
        ToyConfig {
            r,
            n_train,
            n_test,
            mu_lo,
            mu_hi,
            seed,
            positive: (5.0, 0.2),
            negative: (4.0, 0.1),
            spread: SpreadParam::StdDev,
            noise_basis: NoiseBasis::PerSample,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.r
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::InvalidConfig("r must be at least 1".into()));
        }
        if !(self.mu_lo < self.mu_hi) {
            return Err(Error::InvalidConfig(format!(
                "need mu_lo < mu_hi, got [{}, {}]",
                self.mu_lo, self.mu_hi
            )));
        }
        if self.mu_lo <= 0.0 {
            return Err(Error::InvalidConfig("mu_lo must be positive".into()));
        }
        for (name, n) in [("n_train", self.n_train), ("n_test", self.n_test)] {
            if n < 2 || n % 2 != 0 {
                return Err(Error::InvalidConfig(format!("{name} must be even and at least 2, got {n}")));
            }
        }
        Ok(())
    }

    fn class_normal(&self, label: Label) -> Normal<f64> {
        let (mean, b) = match label {
            Label::Positive => self.positive,
            Label::Negative => self.negative,
        };
        let sd = match self.spread {
            SpreadParam::StdDev => b,
            SpreadParam::Variance => b.sqrt(),
        };
        Normal::new(mean, sd).expect("finite class spread")
    }
}

/// `+1, −1, +1, …`: exactly balanced for even `n`.
pub fn balanced_labels(n: usize) -> Vec<Label> {
    (0..n)
        .map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative })
        .collect()
}

/// Draws a train/test pair.
pub fn toy_generate(cfg: &ToyConfig) -> Result<(LabeledSpdDataset, LabeledSpdDataset)> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(STREAM_BASIS);
    let q = random_orthonormal(cfg.dim(), &mut rng);
    let fixed_v = match cfg.noise_basis {
        NoiseBasis::Fixed => Some(random_orthonormal(cfg.dim(), &mut rng)),
        NoiseBasis::PerSample => None,
    };

    let draw = |stream: u64, n: usize| -> Result<LabeledSpdDataset> {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let labels = balanced_labels(n);
        let samples = labels
            .iter()
            .map(|&y| draw_sample(cfg, &q, fixed_v.as_ref(), y, &mut rng))
            .collect::<Result<_>>()?;
        LabeledSpdDataset::new(samples, labels)
    };
    let train = draw(STREAM_TRAIN, cfg.n_train)?;
    let test = draw(STREAM_TEST, cfg.n_test)?;
    Ok((train, test))
}

fn draw_sample<R: Rng>(
    cfg: &ToyConfig,
    q: &DMatrix<f64>,
    fixed_v: Option<&DMatrix<f64>>,
    label: Label,
    rng: &mut R,
) -> Result<SpdMatrix> {
    let d = cfg.dim();
    let class = cfg.class_normal(label);
    let nuisance = Uniform::new(cfg.mu_lo, cfg.mu_hi).expect("validated range");
    loop {
        let mut diag: Vec<f64> = (0..cfg.r).map(|_| class.sample(rng)).collect();
        diag.extend((0..cfg.r).map(|_| nuisance.sample(rng)));
        let eps: Vec<f64> = (0..d)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                e.abs()
            })
            .collect();
        let v = match fixed_v {
            Some(v) => v.clone(),
            None => random_orthonormal(d, rng),
        };
        let signal = SymMatrix::from_diagonal(&diag).congruence(q);
        let noise = SymMatrix::from_diagonal(&eps).congruence(&v);
        // A class draw far in the tail can make λ non-positive; redraw then.
        if let Ok(x) = SpdMatrix::new(&signal + &noise) {
            return Ok(x);
        }
    }
}
