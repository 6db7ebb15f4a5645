//! Nearest-neighbour evaluation with pluggable SPD distances, the synthetic
//! covariance generator, whitening, and dataset files.

mod io;
mod toy;

pub use io::{dataset_read, dataset_write, format_dataset, format_matrix, matrix_read, matrix_write, parse_dataset, parse_matrix};
pub use toy::{balanced_labels, toy_generate, NoiseBasis, SpreadParam, ToyConfig};

use rayon::prelude::*;

use crate::alignment::{Label, LabeledSpdDataset};
use crate::error::{check_dim, Result};
use crate::geometry::{congruent, dist_airm, karcher_mean, log_whitened, KarcherConfig};
use crate::symmat::{invsqrtm, SpdMatrix, SymMatrix};

/// Reference point of a LogEuclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Identity,
    /// Karcher mean of the training samples.
    RiemannianMean,
    Explicit(SpdMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Euclid,
    Airm,
    LogEuclid(Reference),
}

/// A metric bound to a training set, with per-sample work hoisted out of the query loop.
enum Resolved<'a> {
    Euclid(&'a [SpdMatrix]),
    Airm(&'a [SpdMatrix]),
    /// `G^{-1/2}` and the training logs `log(G^{-1/2} X_i G^{-1/2})`.
    LogEuclid { whitener: SpdMatrix, logs: Vec<SymMatrix> },
}

impl<'a> Resolved<'a> {
    fn new(samples: &'a [SpdMatrix], metric: &MetricSpec) -> Result<Self> {
        let d = samples[0].dim();
        Ok(match metric {
            MetricSpec::Euclid => Resolved::Euclid(samples),
            MetricSpec::Airm => Resolved::Airm(samples),
            MetricSpec::LogEuclid(reference) => {
                let g = match reference {
                    Reference::Identity => SpdMatrix::identity(d),
                    Reference::RiemannianMean => karcher_mean(samples, KarcherConfig::default())?.mean,
                    Reference::Explicit(g) => {
                        check_dim(d, g.dim())?;
                        g.clone()
                    }
                };
                let whitener = invsqrtm(&g);
                let logs = samples
                    .par_iter()
                    .map(|x| log_whitened(&whitener, x))
                    .collect::<Result<_>>()?;
                Resolved::LogEuclid { whitener, logs }
            }
        })
    }

    /// Distances from `x` to every training sample, in index order.
    fn distances(&self, x: &SpdMatrix) -> Result<Vec<f64>> {
        match self {
            Resolved::Euclid(s) => s.iter().map(|t| crate::geometry::dist_euclid(t, x)).collect(),
            Resolved::Airm(s) => s.iter().map(|t| dist_airm(t, x)).collect(),
            Resolved::LogEuclid { whitener, logs } => {
                check_dim(whitener.dim(), x.dim())?;
                let lx = log_whitened(whitener, x)?;
                Ok(logs.iter().map(|l| (l - &lx).frob_norm()).collect())
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Resolved::Euclid(s) | Resolved::Airm(s) => s[0].dim(),
            Resolved::LogEuclid { whitener, .. } => whitener.dim(),
        }
    }

    fn nearest(&self, x: &SpdMatrix) -> Result<usize> {
        check_dim(self.dim(), x.dim())?;
        Ok(argmin_first(&self.distances(x)?))
    }
}

/// Index of the smallest value; ties go to the lowest index.
fn argmin_first(ds: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in ds.iter().enumerate().skip(1) {
        if v < ds[best] {
            best = i;
        }
    }
    best
}

/// 1-NN over raw parallel slices, which may hold a single sample.
pub fn nearest_neighbor(samples: &[SpdMatrix], labels: &[Label], x: &SpdMatrix, metric: &MetricSpec) -> Result<Label> {
    assert!(!samples.is_empty() && samples.len() == labels.len());
    let resolved = Resolved::new(samples, metric)?;
    Ok(labels[resolved.nearest(x)?])
}

pub fn nn1_classify(train: &LabeledSpdDataset, x: &SpdMatrix, metric: &MetricSpec) -> Result<Label> {
    nearest_neighbor(train.samples(), train.labels(), x, metric)
}

/// 1-NN predictions for every test sample, in order.
pub fn predict(train: &LabeledSpdDataset, test: &[SpdMatrix], metric: &MetricSpec) -> Result<Vec<Label>> {
    let resolved = Resolved::new(train.samples(), metric)?;
    test.par_iter()
        .map(|x| Ok(train.labels()[resolved.nearest(x)?]))
        .collect()
}

/// Index of the nearest training sample for every test sample.
pub fn nearest_indices(train: &[SpdMatrix], test: &[SpdMatrix], metric: &MetricSpec) -> Result<Vec<usize>> {
    let resolved = Resolved::new(train, metric)?;
    test.par_iter().map(|x| resolved.nearest(x)).collect()
}

/// Fraction of test samples whose 1-NN label matches.
pub fn evaluate_accuracy(train: &LabeledSpdDataset, test: &LabeledSpdDataset, metric: &MetricSpec) -> Result<f64> {
    check_dim(train.dim(), test.dim())?;
    let pred = predict(train, test.samples(), metric)?;
    let hits = pred.iter().zip(test.labels()).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / test.len() as f64)
}

/// Applies `Γ_{M^{-1/2}}` to every sample.
pub fn whiten_with(ds: &LabeledSpdDataset, mean: &SpdMatrix) -> Result<LabeledSpdDataset> {
    let w = invsqrtm(mean);
    let samples = ds
        .samples()
        .par_iter()
        .map(|x| congruent(&w, x))
        .collect::<Result<_>>()?;
    LabeledSpdDataset::new(samples, ds.labels().to_vec())
}

/// Recenters a dataset so its Karcher mean is the identity; returns the mean used.
pub fn whiten(ds: &LabeledSpdDataset) -> Result<(LabeledSpdDataset, SpdMatrix)> {
    let mean = karcher_mean(ds.samples(), KarcherConfig::default())?.mean;
    Ok((whiten_with(ds, &mean)?, mean))
}
