use thiserror::Error;

use crate::series::Branch;

/// Errors raised by the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    /// λ = 0 has no series solution; use the Jaynes–Cummings closed forms.
    #[error("lambda = 0 is the Jaynes-Cummings limit; use the closed forms")]
    JaynesCummingsLimit,

    /// A recurrence denominator vanished at the trial abscissa.
    #[error("{branch:?} recurrence hit a pole at x = {x} (index {index})")]
    PoleHit { x: f64, index: usize, branch: Branch },

    #[error("series not converged after {n_used} terms at x = {x}")]
    NotConverged { x: f64, n_used: usize },

    /// Sector functions only exist with Z2 symmetry.
    #[error("parity sectors require epsilon = 0 (got {0})")]
    SymmetryBroken(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Fock truncation too small: tail mass {tail:e} exceeds {limit:e}")]
    Truncation { tail: f64, limit: f64 },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("oracle spectrum not converged at N_max = {n_max} (last change {last_change:e})")]
    OracleNotConverged { n_max: usize, last_change: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("no data rows")]
    NoDataRows,

    #[error("column `{column}` declares unknown unit `{unit}`")]
    UnitMismatch { column: String, unit: String },

    #[error("I/O: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
