use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar input is outside its admissible range.
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// Breakpoints of a piecewise-linear payoff must be strictly increasing in `s`.
    NonMonotoneBreakpoints { index: usize },
    /// The far-field value at some level exceeds the asserted bound `C_b`.
    FarFieldExceedsBound { level: usize, value: f64, bound: f64 },
    /// The characteristic foot of `node` leaves its host cell at `step`.
    InadmissibleStep { node: usize, step: usize, max_dt: f64 },
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    NonFinite { what: &'static str, index: usize },
    ZeroPivot { row: usize },
    NotConverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, value, reason } => {
                write!(f, "invalid {name} = {value}: {reason}")
            }
            Error::NonMonotoneBreakpoints { index } => {
                write!(f, "payoff breakpoints not strictly increasing at index {index}")
            }
            Error::FarFieldExceedsBound { level, value, bound } => write!(
                f,
                "far-field value {value} at level {level} exceeds the bound C_b = {bound}"
            ),
            Error::InadmissibleStep { node, step, max_dt } => write!(
                f,
                "characteristic foot of node {node} leaves its cell at step {step}; \
                 time step must not exceed {max_dt}"
            ),
            Error::DimensionMismatch { what, expected, found } => {
                write!(f, "{what}: expected length {expected}, found {found}")
            }
            Error::NonFinite { what, index } => write!(f, "non-finite {what} at index {index}"),
            Error::ZeroPivot { row } => write!(f, "zero or non-finite pivot at row {row}"),
            Error::NotConverged { step, iterations, residual } => write!(
                f,
                "policy iteration did not converge at step {step} after {iterations} \
                 iterations (residual {residual:e})"
            ),
        }
    }
}

impl core::error::Error for Error {}
