//! Validation reports.
//!
//! Violations are data, not failures: validators collect every broken
//! invariant with the offending vertex or edge, and constructors reject
//! inputs whose report is nonempty. Graph-level entries carry dense
//! vertex indices; file-level entries carry the vertex names used in the
//! configuration.

use std::fmt;

use crate::graph::VertexId;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateVertex(VertexId),
    /// Vertex ids must form the dense range `0..n`.
    NonContiguousIds { count: usize, max_id: u32 },
    NonpositiveMeasure { vertex: VertexId, m: f64 },
    UnknownEndpoint { u: VertexId, v: VertexId },
    SelfLoop { vertex: VertexId },
    NonpositiveWeight { u: VertexId, v: VertexId, b: f64 },
    AsymmetricWeight { u: VertexId, v: VertexId, b_uv: f64, b_vu: f64 },
    DuplicateEdge { u: VertexId, v: VertexId },
    // File-level entries, named by the ids appearing in the config.
    DuplicateVertexName(String),
    UnknownVertexName { name: String, context: String },
    InvalidRank(usize),
    NotUnitary { u: String, v: String, defect: f64 },
    NotHermitian { vertex: String, defect: f64 },
    BadMatrixShape { context: String, rank: usize },
    ConnectionOnNonEdge { u: String, v: String },
    DuplicateConnectionEntry { u: String, v: String },
    DuplicatePotentialEntry { vertex: String },
    InvalidScalar { name: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateVertex(x) => write!(f, "vertex {x} listed more than once"),
            NonContiguousIds { count, max_id } => write!(
                f,
                "{count} vertex ids do not form a dense range (max id {max_id})"
            ),
            NonpositiveMeasure { vertex, m } => {
                write!(f, "m({vertex}) = {m} must be strictly positive and finite")
            }
            UnknownEndpoint { u, v } => write!(f, "edge ({u}, {v}) references an unknown vertex"),
            SelfLoop { vertex } => write!(f, "self-loop at vertex {vertex} (b(x,x) must be 0)"),
            NonpositiveWeight { u, v, b } => {
                write!(f, "b({u}, {v}) = {b} must be strictly positive and finite")
            }
            AsymmetricWeight { u, v, b_uv, b_vu } => write!(
                f,
                "asymmetric weights: b({u}, {v}) = {b_uv} but b({v}, {u}) = {b_vu}"
            ),
            DuplicateEdge { u, v } => write!(f, "edge {{{u}, {v}}} listed more than once"),
            DuplicateVertexName(name) => write!(f, "vertex id {name:?} listed more than once"),
            UnknownVertexName { name, context } => {
                write!(f, "{context} references unknown vertex {name:?}")
            }
            InvalidRank(rank) => write!(f, "bundle rank {rank} must be at least 1"),
            NotUnitary { u, v, defect } => write!(
                f,
                "connection matrix on ({u:?}, {v:?}) is not unitary (defect {defect:.3e})"
            ),
            NotHermitian { vertex, defect } => write!(
                f,
                "potential at {vertex:?} is not Hermitian (defect {defect:.3e})"
            ),
            BadMatrixShape { context, rank } => {
                write!(f, "{context}: matrix must be {rank}x{rank} with [re, im] entries")
            }
            ConnectionOnNonEdge { u, v } => write!(
                f,
                "connection entry on ({u:?}, {v:?}) which is not an edge of the graph"
            ),
            DuplicateConnectionEntry { u, v } => {
                write!(f, "connection on edge {{{u:?}, {v:?}}} listed more than once")
            }
            DuplicatePotentialEntry { vertex } => {
                write!(f, "potential at {vertex:?} listed more than once")
            }
            InvalidScalar { name, value } => {
                write!(f, "{name} = {value} must be strictly positive and finite")
            }
        }
    }
}

/// Every invariant violation found in one piece of input data; empty
/// exactly when the data is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok: no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "- {v}")?;
        }
        Ok(())
    }
}

impl From<Vec<Violation>> for ValidationReport {
    fn from(violations: Vec<Violation>) -> Self {
        Self { violations }
    }
}
