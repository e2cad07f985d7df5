use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ma_solver::SolveReport;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("mapped grid escapes the source grid at corner {corner:?}")]
    OutOfRange { corner: Vec<f64> },

    #[error("out of range: {0}")]
    Range(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("non-finite value at node {node}")]
    Evaluation { node: usize },

    #[error("field is not convex at node {node} (second difference {value:e})")]
    Convexity { node: usize, value: f64 },

    #[error(
        "Newton iteration stagnated after {} steps at residual {:e}",
        report.residuals.len(),
        report.final_residual
    )]
    NonConvergence { report: Box<SolveReport> },

    #[error("iterate lost discrete convexity at node {node}")]
    Convexification { node: usize },

    #[error("linear solve failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("least-squares fit failed: {0}")]
    Fit(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("transform failed on slice {slice}: {reason}")]
    Transform { slice: usize, reason: String },

    #[error("unknown barrier kind `{0}`")]
    Spec(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("inner solve failed at outer iteration {outer}: {source}")]
    Eigen { outer: usize, source: Box<Error> },

    #[error("eigen iteration stalled at residual {residual:e} after {iterations} outer steps")]
    EigenNonConvergence { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
}
