//! Compatible Hermitian structures on a real even-dimensional vector space.
//!
//! Given one or two admissible triples `(g, omega, J)` this crate validates
//! them, decides compatibility, computes the canonical bi-orthogonal block
//! decomposition and the bi-unitary group it implies, and builds the
//! commuting family of linear dynamics that are Hamiltonian for both
//! structures (generated by the recursion operator `T = omega_1^-1 omega_2`).

pub mod cli;
pub mod compatibility;
pub mod decomposition;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod operator_f;
pub mod par;
pub mod structures;

pub use error::{Check, Error, Result, Violation};
pub use linalg::{ComplexMatrix, RealMatrix, RealVector, Tolerance};
