use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CvtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CvtError {
    #[error("invalid interval [{lo}, {hi}]: endpoints must be finite with lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("segment [{lo}, {hi}] lies outside the density domain [{domain_lo}, {domain_hi}]")]
    SegmentOutsideDomain {
        lo: f64,
        hi: f64,
        domain_lo: f64,
        domain_hi: f64,
    },

    #[error("non-positive mass {mass:e} on segment [{lo}, {hi}]")]
    NonPositiveMass { lo: f64, hi: f64, mass: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterationsExceeded {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("iterate lost strict ordering at Newton iteration {iteration}")]
    OrderingViolated { iteration: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("{requested} cells or grid nodes exceed the cap of {cap}")]
    CapExceeded { requested: u128, cap: usize },

    #[error("index {index} out of range for {len} cells")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point lies outside the domain in dimension {dim}")]
    OutOfDomain { dim: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("cluster {cluster} received no grid nodes")]
    EmptyCluster { cluster: usize },

    #[error("dimension {dim}: {source}")]
    InDimension {
        dim: usize,
        #[source]
        source: Box<CvtError>,
    },

    #[error("failed to read density table {path}: {message}")]
    Table { path: PathBuf, message: String },
}

impl CvtError {
    pub(crate) fn in_dimension(self, dim: usize) -> Self {
        CvtError::InDimension {
            dim,
            source: Box::new(self),
        }
    }
}
