use thiserror::Error;

/// Failure modes shared by the whole crate.
///
/// Numeric payloads are stored as `f64` regardless of the working scalar so
/// errors stay `Send + Sync + 'static` and serialize uniformly.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("tau = {re}+{im}i is not in the upper half plane")]
    NotInUpperHalfPlane { re: f64, im: f64 },

    #[error("Im tau = {im} is below the evaluation floor {floor}")]
    Precision { im: f64, floor: f64 },

    #[error("z = {re}+{im}i lies outside the theta convergence window |Im z| <= {limit}")]
    ConvergenceWindow { re: f64, im: f64, limit: f64 },

    #[error("z = {re}+{im}i is within {distance:e} of a lattice point")]
    LatticePoint { re: f64, im: f64, distance: f64 },

    #[error("no root found after {iterations} iterations; best candidate {re}+{im}i with residual {residual:e}")]
    NoRoot {
        re: f64,
        im: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("a zero lies too close to the contour after {nudges} nudges (|f| = {value:e} at {re}+{im}i)")]
    BoundaryTooClose {
        re: f64,
        im: f64,
        value: f64,
        nudges: usize,
    },

    #[error("winding integral {value} did not settle near an integer")]
    NonInteger { value: f64 },

    #[error("zero isolation exceeded maximum depth {depth}")]
    MaxDepth { depth: usize },

    #[error("invalid rectangle: {0}")]
    InvalidRectangle(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("every path point was skipped ({skipped} points)")]
    AllPointsSkipped { skipped: usize },

    #[error("degeneracy curve comes within {distance:e} of an orbit point (margin {margin:e})")]
    Overlap { distance: f64, margin: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
