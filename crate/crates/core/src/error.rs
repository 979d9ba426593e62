use thiserror::Error;

use crate::graph::VertexId;
use crate::validate::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("no edge between {x} and {y}")]
    NotAnEdge { x: VertexId, y: VertexId },
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("invalid input data:\n{0}")]
    Invalid(ValidationReport),
    #[error("{context}: matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { context: String, defect: f64 },
    #[error("{context}: matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { context: String, defect: f64 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("jump rate overflow at vertex {vertex}: degree {degree:e} over measure {measure:e}")]
    RateOverflow {
        vertex: VertexId,
        degree: f64,
        measure: f64,
    },
    #[error("path hit the jump cap; transport along exploded paths is undefined")]
    ExplodedPath,
    #[error("estimates target different quantities: {0}")]
    MergeMismatch(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of floating-point computation (overflow, solver
    /// breakdown) as opposed to rejected input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::RateOverflow { .. } | Error::Numeric(_)
        )
    }
}
