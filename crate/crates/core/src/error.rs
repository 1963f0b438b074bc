use thiserror::Error;

/// Errors surfaced by the kernel library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{value} is not prime (Miller-Rabin witness {witness})")]
    NotPrime { value: u64, witness: u64 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precision budget exceeded: {0}")]
    Precision(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("search exhausted: {0}")]
    Exhausted(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// Prefix the message with `ctx`, keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        use Error::*;
        match self {
            NotPrime { .. } => self,
            OutOfRange(m) => OutOfRange(format!("{ctx}: {m}")),
            Domain(m) => Domain(format!("{ctx}: {m}")),
            Shape(m) => Shape(format!("{ctx}: {m}")),
            Precision(m) => Precision(format!("{ctx}: {m}")),
            Config(m) => Config(format!("{ctx}: {m}")),
            Exhausted(m) => Exhausted(format!("{ctx}: {m}")),
            Format(m) => Format(format!("{ctx}: {m}")),
            Io(m) => Io(format!("{ctx}: {m}")),
            Internal(m) => Internal(format!("{ctx}: {m}")),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
