use std::fmt;
use std::io;

/// Errors raised anywhere in the library.
#[derive(Debug)]
pub enum Error {
    /// Operand shapes are incompatible.
    Shape(String),
    /// A NaN or infinity appeared where finite values are required.
    NonFinite(String),
    /// A norm or denominator vanished.
    ZeroNorm(String),
    /// `backward` was called on a loss that does not depend on any
    /// gradient-tracking tensor.
    EmptyGradient,
    /// Optimizer or network state is inconsistent (e.g. a missing gradient).
    State(String),
    /// The replay buffer holds fewer transitions than requested.
    Underfull { count: usize, batch: usize },
    /// A vector has the wrong width for the buffer or environment.
    Width { expected: usize, got: usize },
    /// Malformed checkpoint or CSV input.
    Parse(String),
    /// The operation does not apply to this action-head variant.
    UnsupportedVariant(String),
    /// Summaries need results for both head variants.
    MissingVariant(String),
    /// Invalid run or agent configuration.
    Config(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::ZeroNorm(msg) => write!(f, "zero norm: {msg}"),
            Error::EmptyGradient => {
                write!(f, "loss does not depend on any tensor that requires a gradient")
            }
            Error::State(msg) => write!(f, "invalid state: {msg}"),
            Error::Underfull { count, batch } => write!(
                f,
                "replay buffer holds {count} transitions, cannot sample a batch of {batch}"
            ),
            Error::Width { expected, got } => {
                write!(f, "width mismatch: expected {expected}, got {got}")
            }
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::UnsupportedVariant(msg) => write!(f, "unsupported head variant: {msg}"),
            Error::MissingVariant(v) => write!(f, "no results for head variant `{v}`"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
