use thiserror::Error;

use crate::sparse::SolveReport;

/// Structural problems with sparse matrices and vectors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({n_rows}x{n_cols})")]
    NotSquare { n_rows: usize, n_cols: usize },
}

/// Linear solver failures.
#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    Structure(#[from] SparseError),
    #[error("matrix is not symmetric: |a({row},{col}) - a({col},{row})| = {defect:e}")]
    NotSymmetric { row: usize, col: usize, defect: f64 },
    #[error("no convergence after {} iterations (relative residual {:e})", .report.iterations, .report.residual_norm)]
    NotConverged { best: Vec<f64>, report: SolveReport },
    #[error("matrix is singular or nearly singular (pivot {pivot:e} at step {step})")]
    Singular { step: usize, pivot: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("uniform mesh needs n >= 2, got {0}")]
    TooCoarse(usize),
    #[error("slanted mesh level must lie in [0, 10], got {0}")]
    LevelOutOfRange(usize),
    #[error("invalid interface geometry: {0}")]
    Geometry(String),
}

#[derive(Debug, Clone, Error)]
pub enum SchemeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("solid solve failed: {0}")]
    Solid(SolveError),
    #[error("fluid solve failed: {0}")]
    Fluid(SolveError),
    #[error("monolithic solve failed: {0}")]
    Monolithic(SolveError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseError {
    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CutoffError {
    #[error("time step {0} must satisfy 0 < dt < 1/2")]
    TimeStep(f64),
    #[error("point ({0}, {1}) lies outside the unit square")]
    OutsideDomain(f64, f64),
}

/// Errors raised by the study driver and its configuration layer.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
