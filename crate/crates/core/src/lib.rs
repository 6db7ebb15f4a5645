//! Supervised learning of the reference point of a LogEuclidean distance on
//! symmetric positive definite matrices.
//!
//! The reference `G` parameterizes
//! `δ_G(A, B) = ‖log(G^{-1/2} A G^{-1/2}) − log(G^{-1/2} B G^{-1/2})‖_F`
//! and is learned by maximizing centered kernel-target alignment with
//! geodesic gradient ascent under the affine-invariant metric.

pub mod error;
pub mod symmat;
pub mod geometry;
pub mod logderiv;
pub mod random;
pub mod alignment;
pub mod optimize;
pub mod learnkit;
pub mod experiment;
pub mod cli;

pub use error::{Error, Result};
pub use symmat::{SpdMatrix, SymMatrix};
