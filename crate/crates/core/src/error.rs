//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the formula being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A curve or market parameter violates its sign/range invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// The operation is not defined for this curve family.
    #[error("wrong market family: {0}")]
    WrongFamily(String),

    #[error(
        "no sign change in bracket [{lo}, {hi}]: excess demand is {f_lo} at {lo} and {f_hi} at {hi}"
    )]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("unsolvable market: {0}")]
    Unsolvable(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 config/usage, 3 domain/solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownName(_) => 2,
            Error::Io { .. } => 4,
            Error::Domain(_)
            | Error::Invariant(_)
            | Error::WrongFamily(_)
            | Error::Bracket { .. }
            | Error::Unsolvable(_) => 3,
        }
    }
}
