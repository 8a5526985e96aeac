use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad dimension, bad parameter, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Floating point breakdown: non-convergence, loss of definiteness.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An instance that the requested diagnostic cannot be evaluated on.
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    /// An episode failed inside an experiment; carries its attribution.
    #[error("replication {rep}, policy `{policy}`: {source}")]
    Episode {
        rep: usize,
        policy: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// The innermost error, with episode attribution stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Episode { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
