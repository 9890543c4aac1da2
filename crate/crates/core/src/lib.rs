//! Exact combinatorics of `n^2 x n^2` S-permutation matrices: enumeration,
//! disjointness counting, closed-form bounds and Sudoku assembly.

pub mod counting;
pub mod error;
pub mod matrix;
pub mod oracle;
pub mod perm;
pub mod report;
pub mod sudoku;

pub use error::{Error, Result};
pub use matrix::{
    compose_cad, random_sperm, validate_sperm, CadFactors, DenseBits, SPermMatrix, Sigma,
};
pub use perm::{theta, theta_inv, Perm};

/// Exact signed count.
pub type Count = num_bigint::BigInt;
/// Exact reduced probability.
pub type Probability = num_rational::BigRational;
