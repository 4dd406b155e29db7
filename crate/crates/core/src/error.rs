use thiserror::Error;

/// Errors produced while building or evaluating a design problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("point ({x}, {y}) is {distance:.3e} m away from the boundary")]
    OffBoundary { x: f64, y: f64, distance: f64 },

    #[error("invalid mesh request: {0}")]
    Mesh(String),

    #[error("factorization failed at equation {row}: pivot {pivot:.3e}")]
    Factorization { row: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix not positive definite (smallest eigenvalue {min_eigenvalue:.3e}): {context}")]
    NotPositiveDefinite { context: String, min_eigenvalue: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable numeric category, used for process exit codes and C error codes.
    pub fn code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Geometry(_) | Error::OffBoundary { .. } | Error::Mesh(_) => 3,
            Error::Factorization { .. } | Error::NotPositiveDefinite { .. } => 4,
            Error::Dimension(_) => 5,
            Error::Io(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
