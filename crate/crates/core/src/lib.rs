//! Covariant Schrödinger operators on weighted graphs.
//!
//! A weighted graph `(X, b, m)` carrying a Hermitian vector bundle with a
//! unitary connection `Φ` and a pointwise self-adjoint potential `V`
//! determines a self-adjoint operator `H` on square-summable sections.
//! This crate
//!
//! * assembles `H` on finite graphs and computes the heat semigroup
//!   `exp(-tH)` exactly through a cached spectral decomposition
//!   ([`operator`]),
//! * estimates the same kernel probabilistically, by sampling the jump
//!   process of the graph and transporting the potential along its paths
//!   with a path-ordered exponential ([`stochastic`]),
//! * evaluates Kato-class functionals, partition functions, the
//!   Golden-Thompson trace bound, and the semiclassical limit of the
//!   quantum partition function ([`analysis`]).
//!
//! Problem instances load from TOML files ([`config`]); reports serialize
//! deterministically ([`report`]). The Monte Carlo engine is seeded and
//! mergeable: any partition of the path-index range replays to identical
//! results.

pub mod analysis;
pub mod bundle;
pub mod config;
pub mod error;
pub mod graph;
pub mod instances;
pub mod linalg;
pub mod operator;
pub mod report;
pub mod stochastic;
pub mod tol;
pub mod validate;

pub use error::{Error, Result};
pub use graph::{GraphProvider, VertexId, WeightedGraph};
