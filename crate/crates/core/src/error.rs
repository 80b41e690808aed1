use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One named numerical check: a residual compared against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            residual,
            threshold,
            passed: residual.is_finite() && residual <= threshold,
        }
    }
}

/// Machine-readable account of which invariants failed and by how much.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub checks: Vec<Check>,
}

impl Violation {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failed_names(&self) -> Vec<String> {
        self.failed().map(|c| c.name.clone()).collect()
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated:", self.subject)?;
        for (i, c) in self.failed().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            write!(f, "{sep}{} (residual {:e} > {:e})", c.name, c.residual, c.threshold)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension must be even, got {0}")]
    OddDimension(usize),
    #[error("matrix is not symmetric (relative residual {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not antisymmetric (relative residual {0:e})")]
    NotAntisymmetric(f64),
    #[error("matrix is not positive-definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("symplectic form is degenerate (smallest singular value {0:e})")]
    Degenerate(f64),
    #[error("matrix does not square to -I (residual {0:e})")]
    NotComplexStructure(f64),
    #[error("operator is not self-adjoint for the metric (relative residual {0:e})")]
    NotSelfAdjoint(f64),
    #[error("operator is not skew-adjoint for the metric (relative residual {0:e})")]
    NotSkewAdjoint(f64),
    #[error("input has eigenvalue {0:e}, below the positive-semidefinite floor")]
    NegativeEigenvalue(f64),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("{0}")]
    Violation(Violation),
    #[error("eigenvalue {mu} of T on the G-eigenspace {lambda} is not +/-{lambda}")]
    SpectrumMismatch { lambda: f64, mu: f64 },
    #[error("joint eigenspace has odd dimension {0}")]
    OddBlock(usize),
    #[error("per-block proportionality `{what}` violated (residual {residual:e})")]
    Proportionality { what: String, residual: f64 },
    #[error("numerical rank is ambiguous: singular value {value:e} lies within the band around threshold {threshold:e}")]
    RankAmbiguous { value: f64, threshold: f64 },
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("g_gamma is not positive-definite for gamma = {0}")]
    PencilNotPositive(f64),
    #[error("matrix exponential overflowed (t * |A| = {0:e})")]
    Overflow(f64),
    #[error("canonical basis needs a 2-dimensional block, got {0}")]
    NotTwoDimensional(usize),
}

impl From<Violation> for Error {
    fn from(v: Violation) -> Self {
        Error::Violation(v)
    }
}
