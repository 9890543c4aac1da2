use std::fmt;

use thiserror::Error;

/// The first constraint an S-permutation candidate breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Row(usize),
    Column(usize),
    Block(usize, usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Row(i) => write!(f, "row {i} does not hold exactly one 1"),
            Violation::Column(j) => write!(f, "column {j} does not hold exactly one 1"),
            Violation::Block(k, l) => write!(f, "block ({k}, {l}) does not hold exactly one 1"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("not a permutation: {0}")]
    NotPermutation(String),
    #[error("not a permutation matrix: {0}")]
    NotPermutationMatrix(String),
    #[error("not an S-permutation matrix: {0}")]
    NotSPermutation(Violation),
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("n = {n} is too large for exhaustive work (limit n <= {limit}); pass the override to force it")]
    TooLarge { n: usize, limit: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("xi is not constant over the enumeration (saw {min} and {max})")]
    InvarianceViolated { min: u64, max: u64 },
    #[error("family has {found} members, a Sudoku matrix needs {needed}")]
    IncompleteFamily { found: usize, needed: usize },
    #[error("members {0} and {1} are not disjoint")]
    NotDisjoint(usize, usize),
    #[error("not a Sudoku matrix: {0}")]
    NotSudoku(String),
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("search exhausted after {draws} draws")]
    Exhausted { draws: u64 },
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
