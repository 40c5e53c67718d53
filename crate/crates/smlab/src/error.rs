//! Error type shared across the crate.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Dimension, level or polynomial order outside the supported range.
    OutOfRange(String),
    /// Singularity specification violates its invariants.
    BadSingularity(String),
    /// Operation applied to a mesh it is not defined for
    /// (e.g. a layered tree on a non-point singularity).
    WrongStrategy(String),
    /// Time coordinate not on the mesh lattice.
    OffLattice(String),
    /// Ordering is not a permutation of the graph variables.
    BadPermutation(String),
    /// Partition-tree variable assignment is inconsistent with the graph.
    BadAssignment(String),
    /// Dense pattern is not symmetric or lacks diagonal entries.
    BadPattern(String),
    /// Regression input is degenerate (too few points, nonpositive data, ...).
    BadFit(String),
    Io(std::io::Error),
    /// Malformed input file (mesh JSON, MatrixMarket, ...).
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfRange(m) => write!(f, "out of range: {m}"),
            Error::BadSingularity(m) => write!(f, "invalid singularity: {m}"),
            Error::WrongStrategy(m) => write!(f, "strategy not applicable: {m}"),
            Error::OffLattice(m) => write!(f, "off-lattice coordinate: {m}"),
            Error::BadPermutation(m) => write!(f, "invalid permutation: {m}"),
            Error::BadAssignment(m) => write!(f, "invalid tree assignment: {m}"),
            Error::BadPattern(m) => write!(f, "invalid pattern: {m}"),
            Error::BadFit(m) => write!(f, "invalid fit input: {m}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
