use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("decomposition is empty after pruning zero and cancelling terms")]
    EmptyDecomposition,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dense tensor would need {entries} entries (cap {cap})")]
    CapExceeded { entries: u128, cap: u128 },

    #[error("invalid arguments: {0}")]
    InvalidArgs(String),

    #[error("column {column} has norm {norm}, expected 1")]
    NotUnitNorm { column: usize, norm: f64 },

    #[error("columns {i} and {j} break equiangularity (|inner product| spread {spread:e})")]
    NotEquiangular { i: usize, j: usize, spread: f64 },

    #[error("iteration map sends the vector to zero")]
    ZeroImage,

    #[error("eigenvalue {0:e} is too close to zero")]
    ZeroEigenvalue(f64),

    #[error("vector is not an eigenvector (residual {residual:e})")]
    NotAnEigenvector { residual: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("frame is not an equiangular tight frame")]
    NotEtf,

    #[error("order {0} is odd; an even order is required")]
    OddOrder(usize),

    #[error("root finder did not converge (max residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("eigen-form vanishes identically: every direction is an eigenvector")]
    DegenerateForm,
}

impl Error {
    /// Stable variant name, used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyDecomposition => "EmptyDecomposition",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::CapExceeded { .. } => "CapExceeded",
            Error::InvalidArgs(_) => "InvalidArgs",
            Error::NotUnitNorm { .. } => "NotUnitNorm",
            Error::NotEquiangular { .. } => "NotEquiangular",
            Error::ZeroImage => "ZeroImage",
            Error::ZeroEigenvalue(_) => "ZeroEigenvalue",
            Error::NotAnEigenvector { .. } => "NotAnEigenvector",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::PreconditionFailed(_) => "PreconditionFailed",
            Error::NotEtf => "NotETF",
            Error::OddOrder(_) => "OddOrder",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DegenerateForm => "DegenerateForm",
        }
    }

    /// Module that raises this error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::EmptyDecomposition | Error::DimensionMismatch { .. } | Error::CapExceeded { .. } => {
                "tensor"
            }
            Error::NotUnitNorm { .. } | Error::NotEquiangular { .. } => "frames",
            Error::ZeroImage => "power",
            Error::ZeroEigenvalue(_)
            | Error::NotAnEigenvector { .. }
            | Error::PreconditionFailed(_)
            | Error::NotEtf
            | Error::OddOrder(_) => "robustness",
            Error::NotSymmetric { .. } | Error::NoConvergence { .. } => "linalg",
            Error::DegenerateForm => "eigen2d",
            Error::InvalidArgs(_) => "args",
        }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric_failure(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::DegenerateForm | Error::ZeroImage)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
