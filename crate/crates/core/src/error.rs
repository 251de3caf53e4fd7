use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Bad geometry or grid parameters.
    Grid(&'static str),
    /// A real-valued function was evaluated outside its domain.
    Domain(&'static str),
    /// Diffusion exponent or time step outside the admissible range.
    Regime { m: f64, d: usize },
    /// Two inputs that must share a grid do not.
    Mismatch(&'static str),
    /// An iterative solver hit its cap.
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },
    /// Mass drifted during a run.
    MassDrift(f64),
    /// A size cap was exceeded.
    TooLarge { what: &'static str, limit: usize },
    Invalid(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Grid(s) => write!(f, "grid error: {s}"),
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::Regime { m, d } => write!(f, "exponent m = {m} is not admissible in dimension {d}"),
            Error::Mismatch(s) => write!(f, "mismatched inputs: {s}"),
            Error::NoConvergence { what, iterations, residual } => {
                write!(f, "{what} did not converge after {iterations} iterations (residual {residual:e})")
            }
            Error::MassDrift(e) => write!(f, "mass drift {e:e} exceeds 1e-6"),
            Error::TooLarge { what, limit } => write!(f, "{what} exceeds the cap of {limit}"),
            Error::Invalid(s) => write!(f, "invalid input: {s}"),
        }
    }
}

impl core::error::Error for Error {}
