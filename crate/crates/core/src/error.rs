use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core crate can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A symbol has positive probability under exactly one hypothesis.
    EquivalenceViolation { symbol: String },
    UnknownSymbol { symbol: String },
    InvalidAlphabet(String),
    InvalidDistribution(String),
    InvalidTransmission(String),
    EnumerationTooLarge { size: f64, cap: usize },
    /// Every candidate quantizer yields zero divergence.
    DegenerateFamily,
    InvalidTree(String),
    NotUniform,
    EmptyAfterPrune,
    InvalidParams(String),
    InfeasibleThreshold { level: usize, value: f64, lower: f64, upper: f64 },
    TransformMismatch { level: usize, deviation: f64 },
    EpsilonTooLarge { epsilon: f64, limit: f64 },
    Unachievable { alpha: f64 },
    StateSpaceTooLarge { atoms: usize, cap: usize },
}

impl Error {
    /// True for errors that mean "the requested configuration cannot be
    /// realized" rather than "the input is malformed".
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::DegenerateFamily
                | Error::EmptyAfterPrune
                | Error::InfeasibleThreshold { .. }
                | Error::TransformMismatch { .. }
                | Error::EpsilonTooLarge { .. }
                | Error::Unachievable { .. }
                | Error::StateSpaceTooLarge { .. }
                | Error::EnumerationTooLarge { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EquivalenceViolation { symbol } => write!(
                f,
                "symbol {symbol:?} has positive probability under only one hypothesis"
            ),
            Error::UnknownSymbol { symbol } => write!(f, "unknown symbol {symbol:?}"),
            Error::InvalidAlphabet(msg) => write!(f, "invalid alphabet: {msg}"),
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::InvalidTransmission(msg) => write!(f, "invalid transmission function: {msg}"),
            Error::EnumerationTooLarge { size, cap } => {
                write!(f, "enumeration of {size:.3e} candidates exceeds cap {cap}")
            }
            Error::DegenerateFamily => {
                write!(f, "every quantizer in the family has zero divergence")
            }
            Error::InvalidTree(msg) => write!(f, "invalid tree: {msg}"),
            Error::NotUniform => write!(f, "tree is not h-uniform; uniformize it first"),
            Error::EmptyAfterPrune => write!(f, "pruning removes every subtree (q_N = 1)"),
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::InfeasibleThreshold { level, value, lower, upper } => write!(
                f,
                "threshold {value} at level {level} lies outside the feasible interval ({lower}, {upper})"
            ),
            Error::TransformMismatch { level, deviation } => write!(
                f,
                "closed-form and numeric rates disagree by {deviation:e} at level {level}"
            ),
            Error::EpsilonTooLarge { epsilon, limit } => {
                write!(f, "epsilon {epsilon} must be below {limit}")
            }
            Error::Unachievable { alpha } => write!(f, "no threshold achieves Type I error <= {alpha}"),
            Error::StateSpaceTooLarge { atoms, cap } => {
                write!(f, "exact evaluation needs {atoms} atoms, cap is {cap}")
            }
        }
    }
}

impl core::error::Error for Error {}
