use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A single violated constraint of a coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    TooSmall { k: usize },
    NonFinite { row: usize, col: usize },
    Asymmetric { row: usize, col: usize, magnitude: f64 },
    RowSum { row: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            Violation::TooSmall { k } => write!(f, "system size k={k} is below 2"),
            Violation::NonFinite { row, col } => write!(f, "entry ({row},{col}) is not finite"),
            Violation::Asymmetric { row, col, magnitude } => {
                write!(f, "a[{row}][{col}] - a[{col}][{row}] = {magnitude:e}")
            }
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum} instead of 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// A structural precondition (sizes, indices, levels) does not hold.
    Precondition(String),
    /// An iterative method ran out of iterations.
    NoConvergence { what: &'static str, iterations: usize, last_update: f64 },
    /// An integrand or field produced NaN or infinity.
    NonFinite { what: &'static str, radius: f64 },
    /// Integer arithmetic would overflow.
    Overflow { what: &'static str },
    InvalidMatrix(Vec<Violation>),
    /// Dense eigen or factorization routine failed.
    LinearAlgebra(&'static str),
    /// Eigenvectors at consecutive grid points could not be matched.
    MatchingAmbiguity { alpha_lo: f64, alpha_hi: f64, overlap: f64 },
    SingularMatrix { smallest_eigenvalue: f64 },
    /// A component left the positivity ball `u > U/2` (or `u > 0` for bare evaluation).
    Positivity { component: usize, radius: f64, ratio: f64 },
    SingularJacobian { condition: f64 },
    NewtonDivergence { iterations: usize, residual: f64 },
    /// Branch tracing was requested from a candidate that cannot bifurcate.
    NotCertified(String),
    ZeroTransversality { value: f64 },
    /// The Lagrange multiplier of an accepted point exceeded its tolerance.
    LagrangeMultiplier { value: f64 },
    NonIntegrable { component: usize, tail_ratio: f64 },
    /// The discrete basis is not orthonormal to the required accuracy.
    Gram { deviation: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what}: value {value} outside domain"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::NoConvergence { what, iterations, last_update } => write!(
                f,
                "{what} did not converge in {iterations} iterations (last update {last_update:e})"
            ),
            Error::NonFinite { what, radius } => write!(f, "{what} is not finite at r = {radius}"),
            Error::Overflow { what } => write!(f, "integer overflow while computing {what}"),
            Error::InvalidMatrix(v) => {
                write!(f, "invalid coupling matrix:")?;
                for item in v {
                    write!(f, " [{item}]")?;
                }
                Ok(())
            }
            Error::LinearAlgebra(what) => write!(f, "linear algebra failure: {what}"),
            Error::MatchingAmbiguity { alpha_lo, alpha_hi, overlap } => write!(
                f,
                "eigenvector matching ambiguous on [{alpha_lo}, {alpha_hi}] (overlap {overlap:.3}); refine the grid"
            ),
            Error::SingularMatrix { smallest_eigenvalue } => {
                write!(f, "matrix is singular (smallest |eigenvalue| {smallest_eigenvalue:e})")
            }
            Error::Positivity { component, radius, ratio } => write!(
                f,
                "positivity lost: component {component} has u/U = {ratio} at r = {radius}"
            ),
            Error::SingularJacobian { condition } => {
                write!(f, "Jacobian is singular (condition estimate {condition:e})")
            }
            Error::NewtonDivergence { iterations, residual } => write!(
                f,
                "Newton iteration failed after {iterations} iterations (residual {residual:e})"
            ),
            Error::NotCertified(msg) => write!(f, "candidate not usable: {msg}"),
            Error::ZeroTransversality { value } => {
                write!(f, "transversality quantity vanishes ({value:e})")
            }
            Error::LagrangeMultiplier { value } => {
                write!(f, "Lagrange multiplier {value:e} exceeds acceptance tolerance")
            }
            Error::NonIntegrable { component, tail_ratio } => write!(
                f,
                "forcing term {component} does not decay fast enough (tail ratio {tail_ratio:e})"
            ),
            Error::Gram { deviation } => write!(
                f,
                "basis Gram matrix deviates from identity by {deviation:e}; raise the quadrature order"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
