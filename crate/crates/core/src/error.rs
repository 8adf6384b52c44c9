use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("cylinder does not fit the grid: {0}")]
    CylinderOutOfBounds(String),
    #[error("ellipticity violated: {0}")]
    Ellipticity(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),
    #[error("solver did not converge: {context} (iterations {iterations}, residual {residual:.3e})")]
    NotConverged {
        context: String,
        iterations: usize,
        residual: f64,
    },
    #[error("poisson right-hand side has mean {mean:.3e} (limit 1e-8)")]
    NonZeroMean { mean: f64 },
    #[error("degenerate normal equations: condition number {condition:.3e} exceeds cap {cap:.3e}")]
    IllConditioned { condition: f64, cap: f64 },
    #[error("input is not caloric: relative residual {residual:.3e} exceeds {limit:.3e}")]
    NotCaloric { residual: f64, limit: f64 },
    #[error("excess {excess:.3e} at radius {radius} exceeds the floor {floor:.3e}")]
    ExcessAboveFloor {
        radius: f64,
        excess: f64,
        floor: f64,
    },
    #[error("invalid two-scale configuration: {0}")]
    InvalidTwoScale(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error("field file truncated: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported field file version {0}")]
    Version(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invariant gate failed: {0}")]
    Gate(String),
    #[error("missing manifest in {0}")]
    MissingManifest(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
