//! Numerical tolerances, named by what they guard.

/// Unitarity of connection matrices, gauge factors, and sampled
/// parallel transports.
pub const UNITARY: f64 = 1e-10;

/// Pointwise self-adjointness of potentials and of symmetrized operator
/// matrices.
pub const HERMITIAN: f64 = 1e-10;

/// Exact-kernel identities: symmetry, the semigroup law, conservativity,
/// gauge covariance, and agreement between a matrix and the quadratic
/// form it represents.
pub const KERNEL: f64 = 1e-10;

/// Slack for eigenvalue sign checks and sorted-spectrum comparisons,
/// where the eigensolver's iteration error accumulates.
pub const SPECTRUM: f64 = 1e-8;

/// Slack for the quantum-vs-classical trace inequality.
pub const TRACE_BOUND: f64 = 1e-8;

/// Algebraic identities evaluated in a handful of flops.
pub const TIGHT: f64 = 1e-12;
