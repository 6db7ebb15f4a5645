use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite{}: minimum eigenvalue {min_eigenvalue:e}", index_suffix(.index))]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        /// Sample index when the matrix came from a dataset.
        index: Option<usize>,
    },

    #[error("symmetric eigensolver did not converge within {max_iter} sweeps")]
    EigenNonConvergence { max_iter: usize },

    #[error("spectral function undefined at eigenvalue {eigenvalue:e}")]
    SpectralDomain { eigenvalue: f64 },

    #[error("matrix exponential overflows at eigenvalue {eigenvalue:e}")]
    Overflow { eigenvalue: f64 },

    #[error("finite-difference step underflowed before X +/- hH became positive definite")]
    StepUnderflow,

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("centered Gram matrix is degenerate (norm {norm:e})")]
    DegenerateGram { norm: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}:{line}: {msg}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn index_suffix(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" (sample {i})"),
        None => String::new(),
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
